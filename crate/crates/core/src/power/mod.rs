//! Per-subcarrier power allocation for one or two multiplexed users.
//!
//! With only statistical CSI, a pair on one subcarrier is served by letting
//! exactly one of the two users run SIC. For each choice of SIC user the
//! minimum-power allocation meeting both outage constraints has a closed form;
//! [`solve_pair`] evaluates both and keeps the cheaper one.

mod oracle;

pub use oracle::{oracle_min_power, OracleOptions};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::UserProfile;
use crate::error::{domain, Result};

/// Relative band inside which the two SIC cases count as a tie.
pub const TIE_RELATIVE: f64 = 1e-12;

/// Tolerance (watts, scaled up for powers above 1 W) on the non-strict
/// prerequisite `p_s - p_o * sinr_s <= 0`.
pub const PREREQUISITE_TOL_WATTS: f64 = 1e-12;

/// One per-subcarrier demand of a real user.
///
/// A user asking for `L` subcarriers becomes `L` virtual users, each carrying
/// `R / L` of the total rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualUser {
    pub user_id: usize,
    pub replica: usize,
    /// Target rate on the subcarrier, bit/s/Hz.
    pub per_sc_rate: f64,
    /// `2^rate - 1`.
    pub target_sinr: f64,
    /// QoS-stringency coefficient, 1/W.
    pub beta: f64,
}

impl VirtualUser {
    pub fn new(user_id: usize, replica: usize, per_sc_rate: f64, beta: f64) -> Result<Self> {
        if !(per_sc_rate > 0.0 && per_sc_rate.is_finite()) {
            return Err(domain(format!("per-subcarrier rate must be positive, got {per_sc_rate}")));
        }
        let u = Self {
            user_id,
            replica,
            per_sc_rate,
            target_sinr: pow2_minus_one(per_sc_rate),
            beta,
        };
        u.validate()?;
        Ok(u)
    }

    /// Builds a virtual user directly from a target SINR.
    pub fn with_target_sinr(user_id: usize, replica: usize, target_sinr: f64, beta: f64) -> Result<Self> {
        let u = Self {
            user_id,
            replica,
            per_sc_rate: target_sinr.ln_1p() / std::f64::consts::LN_2,
            target_sinr,
            beta,
        };
        u.validate()?;
        Ok(u)
    }

    /// Replica `replica` of `profile` when the user occupies `per_user` subcarriers.
    pub fn from_profile(profile: &UserProfile, replica: usize, per_user: usize) -> Result<Self> {
        if per_user == 0 || replica >= per_user {
            return Err(domain(format!("replica {replica} out of range for {per_user} subcarriers per user")));
        }
        Self::new(profile.id, replica, profile.total_rate / per_user as f64, profile.beta)
    }

    /// All `per_user` replicas of every profile, user-major.
    pub fn expand(profiles: &[UserProfile], per_user: usize) -> Result<Vec<Self>> {
        profiles
            .iter()
            .flat_map(|p| (0..per_user).map(move |r| Self::from_profile(p, r, per_user)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(domain(format!("user {}: beta must be positive, got {}", self.user_id, self.beta)));
        }
        if !(self.target_sinr > 0.0 && self.target_sinr.is_finite()) {
            return Err(domain(format!(
                "user {}: target SINR must be positive, got {}",
                self.user_id, self.target_sinr
            )));
        }
        Ok(())
    }
}

/// Which member of an ordered pair `(a, b)` performs SIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SicUser {
    A,
    B,
}

impl SicUser {
    pub fn other(self) -> Self {
        match self {
            SicUser::A => SicUser::B,
            SicUser::B => SicUser::A,
        }
    }
}

impl fmt::Display for SicUser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SicUser::A => "a",
            SicUser::B => "b",
        })
    }
}

/// Power allocation for a pair on one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub power_a: f64,
    pub power_b: f64,
    pub sic_user: SicUser,
    pub total: f64,
}

impl PairSolution {
    pub(crate) fn from_roles(sic_user: SicUser, sic_power: f64, other_power: f64) -> Self {
        let (power_a, power_b) = match sic_user {
            SicUser::A => (sic_power, other_power),
            SicUser::B => (other_power, sic_power),
        };
        Self { power_a, power_b, sic_user, total: power_a + power_b }
    }

    /// Power of the user that performs SIC.
    pub fn sic_power(&self) -> f64 {
        match self.sic_user {
            SicUser::A => self.power_a,
            SicUser::B => self.power_b,
        }
    }

    /// Power of the user that decodes with interference treated as noise.
    pub fn other_power(&self) -> f64 {
        match self.sic_user {
            SicUser::A => self.power_b,
            SicUser::B => self.power_a,
        }
    }

    /// Both powers multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_roles(self.sic_user, self.sic_power() * factor, self.other_power() * factor)
    }

    /// Whether the decoding-order prerequisites hold for this allocation.
    pub fn prerequisites_hold(&self, a: &VirtualUser, b: &VirtualUser) -> bool {
        let (s, o) = roles(a, b, self.sic_user);
        prerequisites_hold(self.sic_power(), self.other_power(), s.target_sinr, o.target_sinr)
    }
}

pub(crate) fn roles<'a>(a: &'a VirtualUser, b: &'a VirtualUser, sic: SicUser) -> (&'a VirtualUser, &'a VirtualUser) {
    match sic {
        SicUser::A => (a, b),
        SicUser::B => (b, a),
    }
}

/// `p_o - p_s * sinr_o > 0` (SIC user can decode the other message at all)
/// and `p_s - p_o * sinr_s <= 0` (the other user cannot decode the SIC user's).
pub fn prerequisites_hold(sic_power: f64, other_power: f64, sic_sinr: f64, other_sinr: f64) -> bool {
    let tol = PREREQUISITE_TOL_WATTS * (sic_power + other_power).max(1.0);
    other_power - sic_power * other_sinr > 0.0 && sic_power - other_power * sic_sinr <= tol
}

/// Closed-form minimum-power allocation when `sic` performs SIC.
///
/// With `s` the SIC user and `o` the other one:
/// `p_s = g_s / b_s` and
/// `p_o = max(g_s g_o / b_s + g_o / b_s, g_s g_o / b_s + g_o / b_o, 1 / b_s)`.
pub fn solve_case(a: &VirtualUser, b: &VirtualUser, sic: SicUser) -> Result<PairSolution> {
    a.validate()?;
    b.validate()?;
    let (s, o) = roles(a, b, sic);
    let p_s = s.target_sinr / s.beta;
    let cross = s.target_sinr * o.target_sinr / s.beta;
    let p_o = (cross + o.target_sinr / s.beta)
        .max(cross + o.target_sinr / o.beta)
        .max(1.0 / s.beta);
    Ok(PairSolution::from_roles(sic, p_s, p_o))
}

/// Cheaper of the two SIC cases; near-ties go to `a`.
pub fn solve_pair(a: &VirtualUser, b: &VirtualUser) -> Result<PairSolution> {
    let with_a = solve_case(a, b, SicUser::A)?;
    let with_b = solve_case(a, b, SicUser::B)?;
    if with_a.total <= with_b.total * (1.0 + TIE_RELATIVE) {
        Ok(with_a)
    } else {
        Ok(with_b)
    }
}

/// Explicit decoding order: the user with the larger `beta` performs SIC.
///
/// Only valid when both target SINRs are at least 1; below that the caller
/// has to compare both cases with [`solve_pair`].
pub fn sic_order_rule(a: &VirtualUser, b: &VirtualUser) -> Result<SicUser> {
    a.validate()?;
    b.validate()?;
    if a.target_sinr < 1.0 || b.target_sinr < 1.0 {
        return Err(domain(format!(
            "decoding-order rule needs both target SINRs >= 1, got {} and {}",
            a.target_sinr, b.target_sinr
        )));
    }
    Ok(if a.beta >= b.beta { SicUser::A } else { SicUser::B })
}

/// Power of a user alone on a subcarrier, `sinr / beta`.
pub fn solve_single(u: &VirtualUser) -> Result<f64> {
    u.validate()?;
    Ok(u.target_sinr / u.beta)
}

/// OMA powers when the subcarrier is split into two equal halves.
pub fn oma_pair_power(a: &VirtualUser, b: &VirtualUser) -> Result<(f64, f64)> {
    a.validate()?;
    b.validate()?;
    Ok((oma_half_band(a), oma_half_band(b)))
}

fn oma_half_band(u: &VirtualUser) -> f64 {
    pow2_minus_one(2.0 * u.per_sc_rate) / (2.0 * u.beta)
}

/// `2^x - 1`, exact for integer `x` and accurate near zero.
pub fn pow2_minus_one(x: f64) -> f64 {
    if x.abs() < 0.5 {
        (x * std::f64::consts::LN_2).exp_m1()
    } else {
        x.exp2() - 1.0
    }
}

/// Power saved by NOMA over the half-band OMA split of one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    /// The reported gain: `closed_form` inside the guarantee, `direct` outside.
    pub gain: f64,
    /// Closed-form difference, available when both rates are at least 1 bit/s/Hz.
    pub closed_form: Option<f64>,
    /// OMA total minus the optimal NOMA total, computed directly.
    pub direct: f64,
    pub within_guarantee: bool,
}

/// NOMA-over-OMA power reduction for one pair.
///
/// When both per-subcarrier rates are at least 1 bit/s/Hz the gain has the
/// closed form (with `a` the user of larger beta)
/// `g_a g_b / sqrt(b_a) (1/sqrt(b_b) - 1/sqrt(b_a)) + (g_b/sqrt(b_b) - g_a/sqrt(b_a))^2 / 2`,
/// which is never negative.
pub fn noma_gain_over_oma(a: &VirtualUser, b: &VirtualUser) -> Result<GainReport> {
    let (oma_a, oma_b) = oma_pair_power(a, b)?;
    let noma = solve_pair(a, b)?;
    let direct = (oma_a + oma_b) - noma.total;
    let within_guarantee = a.per_sc_rate >= 1.0 && b.per_sc_rate >= 1.0;
    if !within_guarantee {
        return Ok(GainReport { gain: direct, closed_form: None, direct, within_guarantee });
    }
    let (hi, lo) = if a.beta >= b.beta { (a, b) } else { (b, a) };
    let (sh, sl) = (hi.beta.sqrt(), lo.beta.sqrt());
    let closed = hi.target_sinr * lo.target_sinr / sh * (1.0 / sl - 1.0 / sh)
        + 0.5 * (lo.target_sinr / sl - hi.target_sinr / sh).powi(2);
    Ok(GainReport { gain: closed, closed_form: Some(closed), direct, within_guarantee })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vu(id: usize, sinr: f64, beta: f64) -> VirtualUser {
        VirtualUser::with_target_sinr(id, 0, sinr, beta).unwrap()
    }

    fn close(x: f64, y: f64, rel: f64) -> bool {
        (x - y).abs() <= rel * x.abs().max(y.abs())
    }

    #[test]
    fn virtual_user_sinr_from_rate() {
        let u = VirtualUser::new(0, 0, 2.0, 1.0).unwrap();
        assert_eq!(u.target_sinr, 3.0);
        let v = VirtualUser::with_target_sinr(0, 0, 3.0, 1.0).unwrap();
        assert!((v.per_sc_rate - 2.0).abs() < 1e-15);
        assert!(VirtualUser::new(0, 0, 0.0, 1.0).is_err());
        assert!(VirtualUser::new(0, 0, 1.0, 0.0).is_err());
        assert!(VirtualUser::with_target_sinr(0, 0, 1.0, -2.0).is_err());
    }

    #[test]
    fn case_worked_example() {
        // beta_s = 1, beta_o = 0.5, sinr_s = 1, sinr_o = 3:
        // p_s = 1, p_o = max(3 + 3, 3 + 6, 1) = 9.
        let s = vu(0, 1.0, 1.0);
        let o = vu(1, 3.0, 0.5);
        let sol = solve_case(&s, &o, SicUser::A).unwrap();
        assert_eq!((sol.power_a, sol.power_b, sol.total), (1.0, 9.0, 10.0));
        assert!(sol.prerequisites_hold(&s, &o));

        // Other order: p_b = 6, p_a = max(6 + 2, 6 + 1, 2) = 8.
        let flip = solve_case(&s, &o, SicUser::B).unwrap();
        assert_eq!((flip.power_a, flip.power_b, flip.total), (8.0, 6.0, 14.0));

        let best = solve_pair(&s, &o).unwrap();
        assert_eq!(best.sic_user, SicUser::A);
        assert_eq!(best.total, 10.0);
    }

    #[test]
    fn symmetric_pair_total() {
        for &(g, beta) in &[(1.0, 1.0), (3.0, 0.2), (7.5, 40.0)] {
            let u = vu(0, g, beta);
            let v = vu(1, g, beta);
            let sol = solve_pair(&u, &v).unwrap();
            assert!(close(sol.total, (g * g + 2.0 * g) / beta, 1e-15));
            assert_eq!(sol.sic_user, SicUser::A);
        }
    }

    #[test]
    fn third_term_binds_for_small_sinr() {
        // sinr_s sinr_o + sinr_o < 1 makes 1/beta_s the binding term.
        let s = vu(0, 0.2, 2.0);
        let o = vu(1, 0.3, 4.0);
        let sol = solve_case(&s, &o, SicUser::A).unwrap();
        assert_eq!(sol.power_b, 0.5);
        assert!(sol.prerequisites_hold(&s, &o));
    }

    #[test]
    fn order_rule_examples() {
        let a = vu(0, 1.0, 1.0);
        let b = vu(1, 3.0, 0.5);
        assert_eq!(sic_order_rule(&a, &b).unwrap(), SicUser::A);
        assert_eq!(sic_order_rule(&b, &a).unwrap(), SicUser::B);
        let c = vu(2, 2.0, 1.0);
        assert_eq!(sic_order_rule(&a, &c).unwrap(), SicUser::A);
        assert!(sic_order_rule(&vu(0, 0.5, 1.0), &b).is_err());
    }

    #[test]
    fn single_user_power() {
        assert_eq!(solve_single(&vu(0, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(solve_single(&vu(0, 3.0, 0.5)).unwrap(), 6.0);
    }

    #[test]
    fn oma_examples() {
        let a = VirtualUser::new(0, 0, 1.0, 1.0).unwrap();
        let b = VirtualUser::new(1, 0, 2.0, 0.5).unwrap();
        assert_eq!(oma_pair_power(&a, &a).unwrap().0, 1.5);
        assert_eq!(oma_pair_power(&a, &b).unwrap(), (1.5, 15.0));
        let tiny = VirtualUser::new(0, 0, 1e-9, 1.0).unwrap();
        assert!(oma_pair_power(&tiny, &tiny).unwrap().0 < 1e-8);
    }

    #[test]
    fn gain_worked_example() {
        let a = vu(0, 1.0, 1.0);
        let b = vu(1, 3.0, 0.5);
        let g = noma_gain_over_oma(&a, &b).unwrap();
        assert!(g.within_guarantee);
        assert!((g.direct - 6.5).abs() < 1e-12);
        let by_hand = 3.0 * (1.0 / 0.5f64.sqrt() - 1.0) + 0.5 * (3.0 / 0.5f64.sqrt() - 1.0).powi(2);
        assert!((g.closed_form.unwrap() - by_hand).abs() < 1e-12);
        assert!((g.gain - 6.5).abs() < 1e-12);
    }

    #[test]
    fn gain_vanishes_for_identical_users() {
        let a = vu(0, 3.0, 2.0);
        let g = noma_gain_over_oma(&a, &a).unwrap();
        assert_eq!(g.closed_form, Some(0.0));
        assert!(g.direct.abs() <= 1e-12 * 7.5);
    }

    #[test]
    fn gain_outside_guarantee_is_flagged() {
        let a = VirtualUser::new(0, 0, 0.5, 1.0).unwrap();
        let b = VirtualUser::new(1, 0, 2.0, 0.5).unwrap();
        let g = noma_gain_over_oma(&a, &b).unwrap();
        assert!(!g.within_guarantee);
        assert_eq!(g.closed_form, None);
        assert_eq!(g.gain, g.direct);
    }

    #[test]
    fn gain_grows_with_beta_ratio() {
        let b = vu(1, 3.0, 0.5);
        let mut last = -1.0;
        for k in 0..20 {
            let a = vu(0, 3.0, 0.5 * 1.5f64.powi(k));
            let g = noma_gain_over_oma(&a, &b).unwrap().gain;
            assert!(g > last, "ratio step {k}: {g} <= {last}");
            last = g;
        }
    }

    prop_compose! {
        fn instance()(la in -2.0f64..3.0, lb in -2.0f64..3.0, ra in 0.1f64..10.0, rb in 0.1f64..10.0)
            -> (VirtualUser, VirtualUser) {
            (VirtualUser::new(0, 0, ra, 10f64.powf(la)).unwrap(),
             VirtualUser::new(1, 0, rb, 10f64.powf(lb)).unwrap())
        }
    }

    proptest! {
        #[test]
        fn case_solutions_are_feasible((a, b) in instance()) {
            for sic in [SicUser::A, SicUser::B] {
                let sol = solve_case(&a, &b, sic).unwrap();
                prop_assert!(sol.power_a >= 0.0 && sol.power_b >= 0.0);
                prop_assert_eq!(sol.total, sol.power_a + sol.power_b);
                prop_assert!(sol.prerequisites_hold(&a, &b));
            }
        }

        #[test]
        fn pair_takes_cheaper_case((a, b) in instance()) {
            let best = solve_pair(&a, &b).unwrap();
            let ca = solve_case(&a, &b, SicUser::A).unwrap();
            let cb = solve_case(&a, &b, SicUser::B).unwrap();
            prop_assert!(best.total <= ca.total.min(cb.total) * (1.0 + TIE_RELATIVE));
        }

        #[test]
        fn powers_scale_inversely_with_beta((a, b) in instance(), c in 0.01f64..100.0) {
            let mut a2 = a; a2.beta *= c;
            let mut b2 = b; b2.beta *= c;
            for sic in [SicUser::A, SicUser::B] {
                let s1 = solve_case(&a, &b, sic).unwrap();
                let s2 = solve_case(&a2, &b2, sic).unwrap();
                prop_assert!(close(s2.power_a * c, s1.power_a, 1e-12));
                prop_assert!(close(s2.power_b * c, s1.power_b, 1e-12));
            }
            prop_assert_eq!(sic_order_rule(&a, &b).ok(), sic_order_rule(&a2, &b2).ok());
        }

        #[test]
        fn rule_matches_argmin((a, b) in instance()) {
            if a.target_sinr >= 1.0 && b.target_sinr >= 1.0 {
                prop_assert_eq!(sic_order_rule(&a, &b).unwrap(), solve_pair(&a, &b).unwrap().sic_user);
            }
        }

        #[test]
        fn gain_identity((a, b) in instance()) {
            let g = noma_gain_over_oma(&a, &b).unwrap();
            if let Some(closed) = g.closed_form {
                prop_assert!(g.direct >= -1e-12);
                let scale = closed.abs().max(1e-300);
                prop_assert!((g.direct - closed).abs() <= 1e-9 * scale + 1e-13 * (g.direct.abs() + 1.0));
            }
        }
    }
}
