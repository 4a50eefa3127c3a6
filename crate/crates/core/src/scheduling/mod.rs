//! User scheduling over `M` subcarriers.
//!
//! Every real user asks for `L` subcarriers, which turns `K` users into `KL`
//! virtual users. In the overload regime `M < KL <= 2M` exactly `KL - M`
//! subcarriers carry a NOMA pair and the remaining `2M - KL` carry one user.
//!
//! [`schedule_proposed`] orders the virtual users along the leaves of an
//! average-linkage dendrogram over pairing costs, serves the rightmost ones
//! alone and pairs the left part position by position across its two halves.
//! The dendrogram fixes which leaves are adjacent but not the left/right
//! orientation of each merge; the scheduler picks orientations greedily by
//! total power.
//! [`schedule_exhaustive`] and [`schedule_random`] are the reference points.

mod cluster;
mod exhaustive;
mod random;

pub use cluster::{
    agglomerative_cluster, build_cost_matrix, leaf_order, ordered_leaves, orientation, CostMatrix, Dendrogram, Merge,
};
pub use exhaustive::{count_combinations, count_virtual_combinations, schedule_exhaustive, schedule_exhaustive_virtual, ExhaustiveOutcome, EXHAUSTIVE_LIMIT};
pub use random::{schedule_random, schedule_random_virtual};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::channel::UserProfile;
use crate::error::{config, Result};
use crate::power::{solve_pair, solve_single, PairSolution, VirtualUser, TIE_RELATIVE};

/// Load of one scheduling problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Load {
    pub virtual_users: usize,
    pub subcarriers: usize,
}

impl Load {
    pub fn new(virtual_users: usize, subcarriers: usize) -> Result<Self> {
        if subcarriers == 0 {
            return Err(config("at least one subcarrier is required"));
        }
        if virtual_users <= subcarriers {
            return Err(config(format!(
                "{virtual_users} per-subcarrier demands on {subcarriers} subcarriers is not an overload (need KL > M)"
            )));
        }
        if virtual_users > 2 * subcarriers {
            return Err(config(format!(
                "{virtual_users} per-subcarrier demands exceed two per subcarrier on {subcarriers} subcarriers (need KL <= 2M)"
            )));
        }
        Ok(Self { virtual_users, subcarriers })
    }

    /// Number of NOMA pairs, `KL - M`.
    pub fn pairs(&self) -> usize {
        self.virtual_users - self.subcarriers
    }

    /// Number of users served alone, `2M - KL`.
    pub fn singles(&self) -> usize {
        2 * self.subcarriers - self.virtual_users
    }
}

/// What one subcarrier carries. Indices point into [`Schedule::users`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Single { user: usize, power: f64 },
    /// `a < b` always; the solution's `sic_user` refers to this orientation.
    Pair { a: usize, b: usize, solution: PairSolution },
}

impl Slot {
    pub fn power(&self) -> f64 {
        match self {
            Slot::Single { power, .. } => *power,
            Slot::Pair { solution, .. } => solution.total,
        }
    }

    fn first_index(&self) -> usize {
        match self {
            Slot::Single { user, .. } => *user,
            Slot::Pair { a, .. } => *a,
        }
    }
}

/// Complete assignment of virtual users to subcarriers with their powers.
///
/// Slots are kept in ascending order of their lowest virtual-user index and
/// the total is summed in that order, so two schedules made of the same slots
/// have bit-identical totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub users: Vec<VirtualUser>,
    pub slots: Vec<Slot>,
    pub total_power: f64,
}

impl Schedule {
    /// Builds a schedule from chosen singles and pairs of virtual-user indices.
    pub fn assemble(users: Vec<VirtualUser>, singles: &[usize], pairs: &[(usize, usize)]) -> Result<Self> {
        let mut slots = Vec::with_capacity(singles.len() + pairs.len());
        for &i in singles {
            slots.push(Slot::Single { user: i, power: solve_single(&users[i])? });
        }
        for &(x, y) in pairs {
            let (a, b) = (x.min(y), x.max(y));
            slots.push(Slot::Pair { a, b, solution: solve_pair(&users[a], &users[b])? });
        }
        slots.sort_by_key(Slot::first_index);
        let total_power = slots.iter().map(Slot::power).sum();
        Ok(Self { users, slots, total_power })
    }

    pub fn pair_count(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::Pair { .. })).count()
    }

    /// Checks the structural invariants against `subcarriers`.
    pub fn validate(&self, subcarriers: usize) -> Result<()> {
        let load = Load::new(self.users.len(), subcarriers)?;
        if self.slots.len() != subcarriers {
            return Err(config(format!("{} slots for {subcarriers} subcarriers", self.slots.len())));
        }
        if self.pair_count() != load.pairs() {
            return Err(config(format!("{} pairs, expected {}", self.pair_count(), load.pairs())));
        }
        let mut seen = vec![false; self.users.len()];
        let mut mark = |i: usize| -> Result<()> {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(config(format!("virtual user {i} scheduled twice or unknown")));
            }
            Ok(())
        };
        for slot in &self.slots {
            match *slot {
                Slot::Single { user, .. } => mark(user)?,
                Slot::Pair { a, b, .. } => {
                    mark(a)?;
                    mark(b)?;
                    if self.users[a].user_id == self.users[b].user_id && !self_pairs_unavoidable(&self.users, load) {
                        return Err(config(format!(
                            "user {} paired with itself on one subcarrier",
                            self.users[a].user_id
                        )));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(config("some virtual user is not scheduled"));
        }
        let total: f64 = self.slots.iter().map(Slot::power).sum();
        if total != self.total_power {
            return Err(config("total power does not match the slot powers"));
        }
        Ok(())
    }
}

/// Two replicas of one user may share a subcarrier only when there is a
/// single pair and nobody else to pair with.
pub(crate) fn self_pairs_unavoidable(users: &[VirtualUser], load: Load) -> bool {
    let distinct: HashSet<usize> = users.iter().map(|u| u.user_id).collect();
    distinct.len() == 1 && load.pairs() == 1
}

pub(crate) fn check_self_pairing(users: &[VirtualUser], load: Load) -> Result<()> {
    let distinct: HashSet<usize> = users.iter().map(|u| u.user_id).collect();
    if distinct.len() == 1 && load.pairs() > 1 {
        return Err(config(format!(
            "a single user cannot fill {} pairs without sharing a subcarrier with itself",
            load.pairs()
        )));
    }
    Ok(())
}

/// Clustering-based heuristic for real users asking for `per_user` subcarriers each.
pub fn schedule_proposed(users: &[UserProfile], subcarriers: usize, per_user: usize) -> Result<Schedule> {
    schedule_proposed_virtual(VirtualUser::expand(users, per_user)?, subcarriers)
}

/// How the scheduler orients the dendrogram before reading off its leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    /// The plain [`leaf_order`] rule.
    Fixed,
    /// Start from [`leaf_order`], then flip the children of single merges
    /// while that strictly lowers the schedule's total power.
    #[default]
    Refined,
}

/// Clustering-based heuristic on an explicit list of virtual users, with
/// [`Orientation::Refined`].
pub fn schedule_proposed_virtual(users: Vec<VirtualUser>, subcarriers: usize) -> Result<Schedule> {
    schedule_clustered(users, subcarriers, Orientation::Refined)
}

/// Clustering-based heuristic.
///
/// 1. pairing costs for every pair;
/// 2. average-linkage dendrogram and a planar order of its leaves;
/// 3. the rightmost `2M - KL` leaves are served alone;
/// 4. the remaining leaves are split into a left half `A` and a right half
///    `B` and `A[t]` is paired with `B[t]`.
///
/// Pairs that would put two replicas of one user together are repaired by
/// swapping partners, see [`repair_self_pairs`].
pub fn schedule_clustered(users: Vec<VirtualUser>, subcarriers: usize, orientation: Orientation) -> Result<Schedule> {
    let load = Load::new(users.len(), subcarriers)?;
    check_self_pairing(&users, load)?;
    let costs = build_cost_matrix(&users)?;
    let dendrogram = agglomerative_cluster(&costs);
    let order = match orientation {
        Orientation::Fixed => dendrogram.leaf_order.clone(),
        Orientation::Refined => refined_order(&users, &costs, &dendrogram, load),
    };
    let split = split_order(&users, &order, load)?;
    Schedule::assemble(users, &split.singles, &split.pairs())
}

struct Split {
    left: Vec<usize>,
    right: Vec<usize>,
    singles: Vec<usize>,
}

impl Split {
    fn pairs(&self) -> Vec<(usize, usize)> {
        self.left.iter().copied().zip(self.right.iter().copied()).collect()
    }

    fn cost(&self, costs: &CostMatrix) -> f64 {
        let pairs: f64 = self.left.iter().zip(&self.right).map(|(&a, &b)| costs.get(a, b)).sum();
        pairs + self.singles.iter().map(|&s| costs.get(s, s)).sum::<f64>()
    }
}

fn split_order(users: &[VirtualUser], order: &[usize], load: Load) -> Result<Split> {
    let p = load.pairs();
    let mut split = Split {
        left: order[..p].to_vec(),
        right: order[p..2 * p].to_vec(),
        singles: order[2 * p..].to_vec(),
    };
    repair_self_pairs(users, &mut split.left, &mut split.right, &mut split.singles, load)?;
    Ok(split)
}

/// Greedy pass over the merges, root first, flipping a merge whenever the
/// resulting schedule is cheaper by more than the tie band. Repeats until a
/// full pass changes nothing.
fn refined_order(users: &[VirtualUser], costs: &CostMatrix, dendrogram: &Dendrogram, load: Load) -> Vec<usize> {
    let evaluate = |swapped: &[bool]| {
        let order = dendrogram.order_with(swapped);
        let cost = split_order(users, &order, load).map_or(f64::INFINITY, |s| s.cost(costs));
        (order, cost)
    };
    let mut swapped = dendrogram.swapped.clone();
    let (mut best_order, mut best) = evaluate(&swapped);
    // Each accepted flip lowers the cost, so the loop terminates; the cap
    // only bounds the work on adversarial inputs.
    for _ in 0..users.len().max(8) {
        let mut improved = false;
        for k in (0..swapped.len()).rev() {
            swapped[k] = !swapped[k];
            let (order, cost) = evaluate(&swapped);
            if cost < best * (1.0 - TIE_RELATIVE) {
                best = cost;
                best_order = order;
                improved = true;
            } else {
                swapped[k] = !swapped[k];
            }
        }
        if !improved {
            break;
        }
    }
    best_order
}

/// Removes same-user pairs from the position-wise pairing `left[t] - right[t]`.
///
/// For each conflicting position, in order: swap `right[t]` with the nearest
/// later `right[t']` that leaves both pairs valid; failing that, an earlier
/// one; failing that, trade `right[t]` for the leftmost single of another
/// user. A remaining conflict is accepted only when self-pairing is
/// unavoidable.
pub fn repair_self_pairs(
    users: &[VirtualUser],
    left: &mut [usize],
    right: &mut [usize],
    singles: &mut [usize],
    load: Load,
) -> Result<()> {
    let owner = |i: usize| users[i].user_id;
    let valid = |a: usize, b: usize| owner(a) != owner(b);
    for t in 0..left.len() {
        if valid(left[t], right[t]) {
            continue;
        }
        let swap_ok = |u: usize, right: &[usize]| valid(left[t], right[u]) && valid(left[u], right[t]);
        let later = (t + 1..right.len()).find(|&u| swap_ok(u, right));
        let partner = later.or_else(|| (0..t).rev().find(|&u| swap_ok(u, right)));
        if let Some(u) = partner {
            right.swap(t, u);
            continue;
        }
        if let Some(k) = singles.iter().position(|&s| valid(left[t], s)) {
            std::mem::swap(&mut right[t], &mut singles[k]);
            continue;
        }
        if !self_pairs_unavoidable(users, load) {
            return Err(config(format!(
                "could not avoid pairing user {} with itself",
                owner(left[t])
            )));
        }
    }
    Ok(())
}
