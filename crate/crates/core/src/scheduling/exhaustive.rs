//! Full search over all schedules.

use super::{build_cost_matrix, check_self_pairing, self_pairs_unavoidable, Load, Schedule};
use crate::channel::UserProfile;
use crate::error::{domain, Error, Result};
use crate::power::VirtualUser;

/// Largest number of candidate schedules the full search will visit.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of candidate schedules for `users` single-subcarrier users on
/// `subcarriers` subcarriers: `C(K, 2M - K) * 1 * 3 * ... * (2(K - M) - 1)`.
pub fn count_combinations(users: usize, subcarriers: usize) -> Result<u128> {
    if !(subcarriers < users && users <= 2 * subcarriers) {
        return Err(domain(format!(
            "combination count needs M < K <= 2M, got K = {users}, M = {subcarriers}"
        )));
    }
    Ok(count_virtual_combinations(Load { virtual_users: users, subcarriers }))
}

/// Same count for a validated load of virtual users.
pub fn count_virtual_combinations(load: Load) -> u128 {
    let singles = binomial(load.virtual_users as u128, load.singles() as u128);
    let matchings = (1..=load.pairs() as u128).map(|m| 2 * m - 1).product::<u128>();
    singles * matchings
}

/// Result of the full search.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    pub schedule: Schedule,
    /// Admissible candidates evaluated. Equals the combination count when no
    /// candidate is excluded for pairing a user with itself.
    pub visited: u128,
}

/// Minimum-power schedule over all candidates for real users.
pub fn schedule_exhaustive(users: &[UserProfile], subcarriers: usize, per_user: usize) -> Result<ExhaustiveOutcome> {
    schedule_exhaustive_virtual(VirtualUser::expand(users, per_user)?, subcarriers)
}

/// Minimum-power schedule over all candidates.
///
/// Candidates are generated by taking the lowest unassigned virtual user and
/// either serving it alone or pairing it with a later one. Among equal totals
/// the first candidate in this order wins.
pub fn schedule_exhaustive_virtual(users: Vec<VirtualUser>, subcarriers: usize) -> Result<ExhaustiveOutcome> {
    let load = Load::new(users.len(), subcarriers)?;
    let count = count_virtual_combinations(load);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyCombinations { count, limit: EXHAUSTIVE_LIMIT });
    }
    check_self_pairing(&users, load)?;
    let costs = build_cost_matrix(&users)?;
    let owners: Vec<usize> = users.iter().map(|u| u.user_id).collect();
    let mut search = Search {
        n: users.len(),
        cost: |i: usize, j: usize| costs.get(i, j),
        admissible: |i: usize, j: usize| owners[i] != owners[j] || self_pairs_unavoidable(&users, load),
        assigned: vec![false; users.len()],
        singles: Vec::new(),
        pairs: Vec::new(),
        best: None,
        visited: 0,
    };
    search.visit(0, load.singles(), load.pairs(), 0.0);
    let visited = search.visited;
    let (_, singles, pairs) = search
        .best
        .ok_or_else(|| Error::Infeasible("no admissible schedule".into()))?;
    Ok(ExhaustiveOutcome { schedule: Schedule::assemble(users, &singles, &pairs)?, visited })
}

type Candidate = (f64, Vec<usize>, Vec<(usize, usize)>);

struct Search<C, A> {
    n: usize,
    cost: C,
    admissible: A,
    assigned: Vec<bool>,
    singles: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    best: Option<Candidate>,
    visited: u128,
}

impl<C: Fn(usize, usize) -> f64, A: Fn(usize, usize) -> bool> Search<C, A> {
    // Partial sums run in ascending order of each slot's lowest index, the
    // same order `Schedule::assemble` sums in.
    fn visit(&mut self, from: usize, singles_left: usize, pairs_left: usize, acc: f64) {
        let Some(i) = (from..self.n).find(|&i| !self.assigned[i]) else {
            self.visited += 1;
            if self.best.as_ref().is_none_or(|(b, _, _)| acc < *b) {
                self.best = Some((acc, self.singles.clone(), self.pairs.clone()));
            }
            return;
        };
        self.assigned[i] = true;
        if singles_left > 0 {
            self.singles.push(i);
            self.visit(i + 1, singles_left - 1, pairs_left, acc + (self.cost)(i, i));
            self.singles.pop();
        }
        for j in (i + 1..self.n).filter(|_| pairs_left > 0) {
            if self.assigned[j] || !(self.admissible)(i, j) {
                continue;
            }
            self.assigned[j] = true;
            self.pairs.push((i, j));
            self.visit(i + 1, singles_left, pairs_left - 1, acc + (self.cost)(i, j));
            self.pairs.pop();
            self.assigned[j] = false;
        }
        self.assigned[i] = false;
    }
}
