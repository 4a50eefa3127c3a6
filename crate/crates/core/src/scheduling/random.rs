//! Uniformly random scheduling baseline.

use rand::seq::index::sample;
use rand::Rng;

use super::{check_self_pairing, self_pairs_unavoidable, Load, Schedule};
use crate::channel::UserProfile;
use crate::error::{Error, Result};
use crate::power::VirtualUser;

const MAX_ATTEMPTS: usize = 100_000;

/// Random schedule for real users asking for `per_user` subcarriers each.
pub fn schedule_random<R: Rng + ?Sized>(
    users: &[UserProfile],
    subcarriers: usize,
    per_user: usize,
    rng: &mut R,
) -> Result<Schedule> {
    schedule_random_virtual(VirtualUser::expand(users, per_user)?, subcarriers, rng)
}

/// Draws a schedule uniformly among the admissible ones.
///
/// The singles are a uniform subset; the rest is matched by repeatedly taking
/// the lowest unpaired index and a uniform partner, which is uniform over
/// perfect matchings. Draws that pair a user with itself are rejected and
/// redrawn.
pub fn schedule_random_virtual<R: Rng + ?Sized>(
    users: Vec<VirtualUser>,
    subcarriers: usize,
    rng: &mut R,
) -> Result<Schedule> {
    let load = Load::new(users.len(), subcarriers)?;
    check_self_pairing(&users, load)?;
    let allow_self = self_pairs_unavoidable(&users, load);
    for _ in 0..MAX_ATTEMPTS {
        let mut singles = sample(rng, users.len(), load.singles()).into_vec();
        singles.sort_unstable();
        let mut rest: Vec<usize> = (0..users.len()).filter(|i| singles.binary_search(i).is_err()).collect();
        let mut pairs = Vec::with_capacity(load.pairs());
        let mut admissible = true;
        while !rest.is_empty() {
            let first = rest.remove(0);
            let partner = rest.remove(rng.random_range(0..rest.len()));
            if users[first].user_id == users[partner].user_id && !allow_self {
                admissible = false;
                break;
            }
            pairs.push((first, partner));
        }
        if admissible {
            return Schedule::assemble(users, &singles, &pairs);
        }
    }
    Err(Error::Infeasible("random scheduling found no admissible schedule".into()))
}
