//! Empirical outage checks.
//!
//! Fading gains are drawn per trial and the outage events are evaluated from
//! the achievable-rate expressions directly: the SIC user first tries to
//! decode its partner's message, and depending on the outcome decodes its own
//! either interference-free or with the partner's signal as noise. None of
//! this goes through the closed-form thresholds used by the allocator.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_gain_cdf, sample_gain_with_rate, SystemParams, UserProfile};
use crate::error::{domain, Result};
use crate::power::{roles, PairSolution, VirtualUser};
use crate::rng::{stream, Purpose};

/// Trials per independent block; each block has its own random stream.
const BLOCK: u64 = 1 << 16;

/// Default trial count for a check.
pub const DEFAULT_SAMPLES: u64 = 1_000_000;

/// Upper bound on trials for rare-event checks.
pub const MAX_SAMPLES: u64 = 100_000_000;

/// Trial count for checking an outage target `delta`.
///
/// Targets below 1e-4 get enough trials to expect about 100 outages, capped at
/// [`MAX_SAMPLES`]. Below 1e-6 even the cap sees too few events for a useful
/// estimate and only the analytic value should be trusted.
pub fn samples_for_outage(delta: f64, requested: u64) -> u64 {
    if delta < 1e-4 {
        requested.max((100.0 / delta).ceil() as u64).min(MAX_SAMPLES)
    } else {
        requested
    }
}

/// A virtual user together with its distance, which fixes its fading law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkUser {
    pub user: VirtualUser,
    pub distance: f64,
}

impl LinkUser {
    pub fn new(user: VirtualUser, distance: f64) -> Result<Self> {
        if !(distance >= 0.0 && distance.is_finite()) {
            return Err(domain(format!("distance must be non-negative, got {distance}")));
        }
        Ok(Self { user, distance })
    }

    pub fn from_profile(profile: &UserProfile, replica: usize, per_user: usize) -> Result<Self> {
        Self::new(VirtualUser::from_profile(profile, replica, per_user)?, profile.distance)
    }

    /// Outage target implied by `beta`, distance and noise power.
    pub fn outage_req(&self, params: &SystemParams) -> f64 {
        -(-self.user.beta * params.noise_power * params.gain_rate(self.distance)).exp_m1()
    }
}

/// Empirical outage rate of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub samples: u64,
    pub outages: u64,
    pub outage_rate: f64,
    /// Binomial standard error, `sqrt(rate (1 - rate) / samples)`.
    pub std_error: f64,
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, samples: u64) -> Self {
        let rate = outages as f64 / samples as f64;
        Self { samples, outages, outage_rate: rate, std_error: (rate * (1.0 - rate) / samples as f64).sqrt() }
    }

    /// Number of standard errors by which the estimate exceeds `target`.
    /// A zero standard error is replaced by that of the target itself.
    pub fn excess_sigmas(&self, target: f64) -> f64 {
        let se = if self.std_error > 0.0 {
            self.std_error
        } else {
            (target * (1.0 - target) / self.samples as f64).sqrt()
        };
        (self.outage_rate - target) / se
    }
}

/// Outage estimates for both members of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOutage {
    pub a: OutageEstimate,
    pub b: OutageEstimate,
    /// Trials where the SIC user's two-branch outage event disagreed with the
    /// single-threshold event `|h|^2 < max(t_own, t_cross)`.
    pub threshold_mismatches: u64,
}

fn rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

fn check_pair(solution: &PairSolution, a: &LinkUser, b: &LinkUser) -> Result<()> {
    let (_, o) = roles(&a.user, &b.user, solution.sic_user);
    if solution.other_power() - solution.sic_power() * o.target_sinr <= 0.0 {
        return Err(domain(
            "the SIC user cannot decode its partner: p_other - p_sic * sinr_other <= 0",
        ));
    }
    Ok(())
}

fn per_block<F>(n: u64, base_seed: u64, trial: F) -> [u64; 3]
where
    F: Fn(&mut crate::rng::SimRng) -> [bool; 3] + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(base_seed, Purpose::Fading, k);
            let len = BLOCK.min(n - k * BLOCK);
            let mut counts = [0u64; 3];
            for _ in 0..len {
                for (c, hit) in counts.iter_mut().zip(trial(&mut rng)) {
                    *c += hit as u64;
                }
            }
            counts
        })
        .reduce(|| [0; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]])
}

/// Monte Carlo outage of both users of a pair under `solution`.
pub fn simulate_pair_outage<R: Rng + ?Sized>(
    solution: &PairSolution,
    a: &LinkUser,
    b: &LinkUser,
    params: &SystemParams,
    n: u64,
    rng: &mut R,
) -> Result<PairOutage> {
    if n == 0 {
        return Err(domain("at least one sample is required"));
    }
    check_pair(solution, a, b)?;
    let (s, o) = match solution.sic_user {
        crate::power::SicUser::A => (a, b),
        crate::power::SicUser::B => (b, a),
    };
    let (p_s, p_o) = (solution.sic_power(), solution.other_power());
    let noise = params.noise_power;
    let (rate_s, rate_o) = (params.gain_rate(s.distance), params.gain_rate(o.distance));
    let (target_s, target_o) = (s.user.per_sc_rate, o.user.per_sc_rate);
    let t_own = s.user.target_sinr * noise / p_s;
    let t_cross = o.user.target_sinr * noise / (p_o - p_s * o.user.target_sinr);
    let threshold = t_own.max(t_cross);

    let base_seed: u64 = rng.random();
    let [out_s, out_o, mismatch] = per_block(n, base_seed, |rng| {
        let h_s = sample_gain_with_rate(rate_s, rng);
        let h_o = sample_gain_with_rate(rate_o, rng);
        // SIC user: decode the partner first, then its own message.
        let decodes_partner = rate(p_o * h_s / (p_s * h_s + noise)) >= target_o;
        let outage_s = if decodes_partner {
            rate(p_s * h_s / noise) < target_s
        } else {
            rate(p_s * h_s / (p_o * h_s + noise)) < target_s
        };
        let outage_o = rate(p_o * h_o / (p_s * h_o + noise)) < target_o;
        [outage_s, outage_o, outage_s != (h_s < threshold)]
    });
    let est_s = OutageEstimate::from_counts(out_s, n);
    let est_o = OutageEstimate::from_counts(out_o, n);
    let (ea, eb) = match solution.sic_user {
        crate::power::SicUser::A => (est_s, est_o),
        crate::power::SicUser::B => (est_o, est_s),
    };
    Ok(PairOutage { a: ea, b: eb, threshold_mismatches: mismatch })
}

/// Analytic outage probabilities `(a, b)` of a pair allocation.
pub fn closed_form_outage(
    solution: &PairSolution,
    a: &LinkUser,
    b: &LinkUser,
    params: &SystemParams,
) -> Result<(f64, f64)> {
    check_pair(solution, a, b)?;
    let (s, o) = match solution.sic_user {
        crate::power::SicUser::A => (a, b),
        crate::power::SicUser::B => (b, a),
    };
    let (p_s, p_o) = (solution.sic_power(), solution.other_power());
    let noise = params.noise_power;
    let t_own = s.user.target_sinr * noise / p_s;
    let t_cross = o.user.target_sinr * noise / (p_o - p_s * o.user.target_sinr);
    let out_s = channel_gain_cdf(t_own.max(t_cross), s.distance, params)?;
    let out_o = channel_gain_cdf(t_cross, o.distance, params)?;
    Ok(match solution.sic_user {
        crate::power::SicUser::A => (out_s, out_o),
        crate::power::SicUser::B => (out_o, out_s),
    })
}

/// Analytic outage of a user alone on a subcarrier at `power`.
pub fn closed_form_single_outage(power: f64, u: &LinkUser, params: &SystemParams) -> Result<f64> {
    if !(power > 0.0) {
        return Err(domain(format!("power must be positive, got {power}")));
    }
    channel_gain_cdf(u.user.target_sinr * params.noise_power / power, u.distance, params)
}

/// Monte Carlo outage of a user alone on a subcarrier at `power`.
pub fn simulate_single_outage<R: Rng + ?Sized>(
    power: f64,
    u: &LinkUser,
    params: &SystemParams,
    n: u64,
    rng: &mut R,
) -> Result<OutageEstimate> {
    if !(power > 0.0) {
        return Err(domain(format!("power must be positive, got {power}")));
    }
    if n == 0 {
        return Err(domain("at least one sample is required"));
    }
    let gain_rate = params.gain_rate(u.distance);
    let noise = params.noise_power;
    let target = u.user.per_sc_rate;
    let base_seed: u64 = rng.random();
    let [outages, _, _] = per_block(n, base_seed, |rng| {
        let h = sample_gain_with_rate(gain_rate, rng);
        [rate(power * h / noise) < target, false, false]
    });
    Ok(OutageEstimate::from_counts(outages, n))
}
