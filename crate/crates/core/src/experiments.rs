//! Random scenarios and the two parameter sweeps (cell size, number of users).
//!
//! Every realization owns two random streams keyed by its index: one for the
//! user draws and one for the random scheduler. The streams do not depend on
//! the swept value, so realization `r` sees the same underlying draws at
//! every point of a sweep (common random numbers), and all four methods in a
//! realization see the same users.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{watts_to_dbm, SystemParams, UserProfile};
use crate::error::{config, Result};
use crate::power::pow2_minus_one;
use crate::rng::{stream, Purpose};
use crate::scheduling::{
    count_virtual_combinations, schedule_exhaustive, schedule_proposed, schedule_random, Load, EXHAUSTIVE_LIMIT,
};

/// Users are placed no closer to the base station than this.
pub const MIN_DISTANCE_M: f64 = 30.0;
/// Range of total target rates, bit/s/Hz.
pub const RATE_RANGE: (f64, f64) = (0.1, 10.0);
/// Outage requirement of Case I.
pub const CASE_I_OUTAGE: f64 = 1e-2;
/// Range of outage requirements in Case II.
pub const CASE_II_RANGE: (f64, f64) = (1e-5, 0.1);

/// How outage requirements are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutageCase {
    /// Every user asks for 1e-2.
    CaseI,
    /// Each user draws its requirement uniformly from [1e-5, 0.1].
    CaseII,
}

impl OutageCase {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::CaseI),
            2 => Ok(Self::CaseII),
            _ => Err(config(format!("outage case must be 1 or 2, got {n}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::CaseI => 1,
            Self::CaseII => 2,
        }
    }
}

/// Parameters of one family of random scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub per_user: usize,
    /// Cell radius in meters.
    pub cell_size: f64,
    pub outage_case: OutageCase,
    pub noise_dbm: f64,
    pub alpha: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_users: 4,
            num_subcarriers: 5,
            per_user: 2,
            cell_size: 200.0,
            outage_case: OutageCase::CaseI,
            noise_dbm: -128.0,
            alpha: 3.6,
            realizations: 1000,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.per_user == 0 {
            return Err(config("need at least one user and one subcarrier per user"));
        }
        Load::new(self.num_users * self.per_user, self.num_subcarriers)?;
        if !(self.cell_size > MIN_DISTANCE_M) || !self.cell_size.is_finite() {
            return Err(config(format!(
                "cell size must exceed {MIN_DISTANCE_M} m, got {}",
                self.cell_size
            )));
        }
        if self.realizations == 0 {
            return Err(config("at least one realization is required"));
        }
        self.params().map_err(|e| config(e.to_string()))?;
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::from_dbm(self.noise_dbm, self.alpha)
    }

    pub fn load(&self) -> Result<Load> {
        Load::new(self.num_users * self.per_user, self.num_subcarriers)
    }
}

/// Draws `cfg.num_users` users.
///
/// Each user consumes three uniforms in a fixed order (distance, rate,
/// outage), also in Case I, so that the first `k` users of a stream do not
/// depend on the case or on how many users follow.
pub fn generate_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<UserProfile>> {
    cfg.validate()?;
    let params = cfg.params()?;
    (1..=cfg.num_users)
        .map(|id| {
            let u_d: f64 = rng.random();
            let u_r: f64 = rng.random();
            let u_o: f64 = rng.random();
            let distance = MIN_DISTANCE_M + u_d * (cfg.cell_size - MIN_DISTANCE_M);
            let rate = RATE_RANGE.0 + u_r * (RATE_RANGE.1 - RATE_RANGE.0);
            let outage = match cfg.outage_case {
                OutageCase::CaseI => CASE_I_OUTAGE,
                OutageCase::CaseII => CASE_II_RANGE.0 + u_o * (CASE_II_RANGE.1 - CASE_II_RANGE.0),
            };
            UserProfile::new(id, distance, rate, outage, &params)
        })
        .collect()
}

/// Total OMA power when the band is split equally among `users` users on
/// `subcarriers` subcarriers: each user gets `M/K` of a subcarrier and needs
/// `(2^{(K/M) R} - 1) / ((K/M) beta)`.
pub fn oma_system_power(users: &[UserProfile], num_users: usize, subcarriers: usize) -> Result<f64> {
    if num_users == 0 || subcarriers == 0 {
        return Err(config("OMA power needs K > 0 and M > 0"));
    }
    let mut sum = Summation::default();
    for u in users {
        sum.add(oma_user_power(u.total_rate, u.beta, num_users, subcarriers)?);
    }
    Ok(sum.value())
}

/// OMA power of one user with total rate `total_rate` on its `M/K` share of the band.
pub fn oma_user_power(total_rate: f64, beta: f64, num_users: usize, subcarriers: usize) -> Result<f64> {
    if num_users == 0 || subcarriers == 0 {
        return Err(config("OMA power needs K > 0 and M > 0"));
    }
    let split = num_users as f64 / subcarriers as f64;
    Ok(pow2_minus_one(split * total_rate) / (split * beta))
}

/// Total powers of the four methods on one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationTotals {
    pub proposed: f64,
    pub random: f64,
    /// `None` when the full search would exceed [`EXHAUSTIVE_LIMIT`].
    pub exhaustive: Option<f64>,
    pub oma: f64,
}

/// Runs realization `index` of `cfg`.
pub fn run_realization(cfg: &ScenarioConfig, index: u64) -> Result<RealizationTotals> {
    let mut scenario_rng = stream(cfg.seed, Purpose::Scenario, index);
    let users = generate_scenario(cfg, &mut scenario_rng)?;
    let (m, l) = (cfg.num_subcarriers, cfg.per_user);
    let proposed = schedule_proposed(&users, m, l)?.total_power;
    let mut random_rng = stream(cfg.seed, Purpose::RandomSchedule, index);
    let random = schedule_random(&users, m, l, &mut random_rng)?.total_power;
    let exhaustive = if count_virtual_combinations(cfg.load()?) <= EXHAUSTIVE_LIMIT {
        Some(schedule_exhaustive(&users, m, l)?.schedule.total_power)
    } else {
        None
    };
    let oma = oma_system_power(&users, cfg.num_users, m)?;
    Ok(RealizationTotals { proposed, random, exhaustive, oma })
}

/// Runs all realizations of `cfg` in parallel; results are in index order.
pub fn run_realizations(cfg: &ScenarioConfig) -> Result<Vec<RealizationTotals>> {
    cfg.validate()?;
    (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|r| run_realization(cfg, r))
        .collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Summation {
    sum: f64,
    compensation: f64,
}

impl Summation {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Mean total power of one method over the realizations of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub mean_watts: f64,
    /// `10 log10(1000 * mean_watts)`; averaging happens in watts.
    pub mean_dbm: f64,
    /// Standard error of `mean_watts`.
    pub std_error: f64,
    pub realizations: usize,
}

impl MethodSummary {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mut sum = Summation::default();
        values.iter().for_each(|&v| sum.add(v));
        let mean = sum.value() / n as f64;
        let std_error = if n > 1 {
            let mut sq = Summation::default();
            values.iter().for_each(|&v| sq.add((v - mean) * (v - mean)));
            (sq.value() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean_watts: mean, mean_dbm: watts_to_dbm(mean), std_error, realizations: n }
    }
}

/// Scheduling method, as named in output tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Exhaustive,
    Random,
    Oma,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Exhaustive, Method::Random, Method::Oma];

    pub fn name(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Exhaustive => "exhaustive",
            Self::Random => "random",
            Self::Oma => "oma",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`, expected proposed, exhaustive, random or oma"))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Aggregates of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub proposed: MethodSummary,
    pub random: MethodSummary,
    pub exhaustive: Option<MethodSummary>,
    pub oma: MethodSummary,
    /// Realizations where the full search came out above the heuristic.
    /// Always zero unless something is broken.
    pub exhaustive_above_proposed: usize,
}

impl SweepPoint {
    fn from_totals(x: f64, totals: &[RealizationTotals]) -> Self {
        let pick = |f: fn(&RealizationTotals) -> f64| totals.iter().map(f).collect::<Vec<_>>();
        let exhaustive: Option<Vec<f64>> = totals.iter().map(|t| t.exhaustive).collect();
        let exhaustive_above_proposed = totals
            .iter()
            .filter(|t| t.exhaustive.is_some_and(|e| e > t.proposed))
            .count();
        Self {
            x,
            proposed: MethodSummary::from_samples(&pick(|t| t.proposed)),
            random: MethodSummary::from_samples(&pick(|t| t.random)),
            exhaustive: exhaustive.map(|v| MethodSummary::from_samples(&v)),
            oma: MethodSummary::from_samples(&pick(|t| t.oma)),
            exhaustive_above_proposed,
        }
    }

    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        match m {
            Method::Proposed => Some(&self.proposed),
            Method::Exhaustive => self.exhaustive.as_ref(),
            Method::Random => Some(&self.random),
            Method::Oma => Some(&self.oma),
        }
    }

    /// Power saved by the heuristic relative to OMA, in dB.
    pub fn gain_over_oma_db(&self) -> f64 {
        self.oma.mean_dbm - self.proposed.mean_dbm
    }
}

/// Quantity varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    CellSize,
    NumUsers,
}

impl SweepAxis {
    /// Column label of the swept value.
    pub fn label(self) -> &'static str {
        match self {
            Self::CellSize => "cell_size_m",
            Self::NumUsers => "num_users",
        }
    }
}

/// Result of a sweep: one aggregate per swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn x_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    /// Per-method curve of mean watts; `None` entries where the method did not run.
    pub fn curve(&self, m: Method) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.method(m).map(|s| s.mean_watts)).collect()
    }
}

fn sweep<F>(template: &ScenarioConfig, axis: SweepAxis, values: &[f64], apply: F) -> Result<SweepResult>
where
    F: Fn(&mut ScenarioConfig, f64),
{
    if values.is_empty() {
        return Err(config("sweep needs at least one value"));
    }
    let points = values
        .iter()
        .map(|&x| {
            let mut cfg = *template;
            apply(&mut cfg, x);
            cfg.validate()?;
            Ok(SweepPoint::from_totals(x, &run_realizations(&cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis, points })
}

/// Averages the four methods for every cell size in `sizes`.
pub fn sweep_cell_size(template: &ScenarioConfig, sizes: &[f64]) -> Result<SweepResult> {
    sweep(template, SweepAxis::CellSize, sizes, |cfg, d| cfg.cell_size = d)
}

/// Averages the four methods for every user count in `counts`.
pub fn sweep_num_users(template: &ScenarioConfig, counts: &[usize]) -> Result<SweepResult> {
    let values: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    sweep(template, SweepAxis::NumUsers, &values, |cfg, k| cfg.num_users = k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::scheduling::{schedule_proposed_virtual, Slot};

    fn small(case: OutageCase) -> ScenarioConfig {
        ScenarioConfig { realizations: 40, outage_case: case, seed: 7, ..Default::default() }
    }

    #[test]
    fn config_validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        let bad = |f: fn(&mut ScenarioConfig)| {
            let mut c = ScenarioConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.cell_size = 30.0));
        assert!(bad(|c| c.realizations = 0));
        assert!(bad(|c| c.num_users = 2));
        assert!(bad(|c| c.num_users = 6));
        assert!(bad(|c| c.per_user = 0));
    }

    #[test]
    fn scenario_bounds_and_cases() {
        let cfg = ScenarioConfig { num_users: 10, num_subcarriers: 5, per_user: 1, cell_size: 250.0, ..Default::default() };
        let mut rng = seeded(1);
        for _ in 0..100 {
            for u in generate_scenario(&cfg, &mut rng).unwrap() {
                assert!((30.0..=250.0).contains(&u.distance));
                assert!((0.1..=10.0).contains(&u.total_rate));
                assert_eq!(u.outage_req, 1e-2);
            }
        }
        let cfg2 = ScenarioConfig { outage_case: OutageCase::CaseII, ..cfg };
        for u in generate_scenario(&cfg2, &mut rng).unwrap() {
            assert!((1e-5..=0.1).contains(&u.outage_req));
        }
    }

    #[test]
    fn mean_rate() {
        let cfg = ScenarioConfig { num_users: 10, num_subcarriers: 5, per_user: 1, ..Default::default() };
        let mut rng = seeded(2);
        let rates: Vec<f64> = (0..1000)
            .flat_map(|_| generate_scenario(&cfg, &mut rng).unwrap())
            .map(|u| u.total_rate)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let sigma = 9.9 / 12f64.sqrt() / (rates.len() as f64).sqrt();
        assert!((mean - 5.05).abs() < 4.0 * sigma, "{mean}");
    }

    #[test]
    fn prefix_users_do_not_depend_on_count() {
        let six = ScenarioConfig { num_users: 6, num_subcarriers: 5, per_user: 1, ..Default::default() };
        let nine = ScenarioConfig { num_users: 9, ..six };
        let a = generate_scenario(&six, &mut seeded(3)).unwrap();
        let b = generate_scenario(&nine, &mut seeded(3)).unwrap();
        assert_eq!(a[..], b[..6]);
    }

    fn profile(rate: f64, beta: f64) -> UserProfile {
        UserProfile { id: 1, distance: 100.0, total_rate: rate, outage_req: 0.01, beta }
    }

    #[test]
    fn oma_examples() {
        assert_eq!(oma_system_power(&[profile(1.0, 1.0)], 2, 1).unwrap(), 1.5);
        assert_eq!(oma_system_power(&[profile(2.0, 0.5)], 3, 3).unwrap(), 6.0);
        assert!(oma_system_power(&[], 0, 1).is_err());
    }

    #[test]
    fn symmetric_pair_matches_oma() {
        let u = profile(1.7, 0.3);
        let users = vec![UserProfile { id: 1, ..u }, UserProfile { id: 2, ..u }];
        let oma = oma_system_power(&users, 2, 1).unwrap();
        let vus = crate::power::VirtualUser::expand(&users, 1).unwrap();
        let schedule = schedule_proposed_virtual(vus, 1).unwrap();
        assert!(matches!(schedule.slots[0], Slot::Pair { .. }));
        assert!((schedule.total_power - oma).abs() <= 1e-12 * oma);
    }

    #[test]
    fn summary_statistics() {
        let s = MethodSummary::from_samples(&[1e-3, 3e-3]);
        assert!((s.mean_watts - 2e-3).abs() < 1e-18);
        assert!((s.mean_dbm - watts_to_dbm(2e-3)).abs() < 1e-12);
        assert!((s.std_error - 1e-3).abs() < 1e-15);
        assert_eq!(MethodSummary::from_samples(&[5.0]).std_error, 0.0);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = Summation::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        assert_eq!(s.value(), 1.0 + 1e-15);
    }

    #[test]
    fn realizations_are_reproducible_and_ordered() {
        let cfg = small(OutageCase::CaseII);
        let a = run_realizations(&cfg).unwrap();
        let b = run_realizations(&cfg).unwrap();
        assert_eq!(a, b);
        for (r, t) in a.iter().enumerate() {
            assert_eq!(*t, run_realization(&cfg, r as u64).unwrap());
            let e = t.exhaustive.unwrap();
            assert!(e <= t.proposed && e <= t.random);
        }
    }

    #[test]
    fn common_draws_make_single_realizations_monotone_in_cell_size() {
        let cfg = small(OutageCase::CaseI);
        let near = run_realizations(&ScenarioConfig { cell_size: 100.0, ..cfg }).unwrap();
        let far = run_realizations(&ScenarioConfig { cell_size: 150.0, ..cfg }).unwrap();
        for (n, f) in near.iter().zip(&far) {
            assert!(f.oma > n.oma);
            assert!(f.random > n.random);
            assert!(f.exhaustive.unwrap() > n.exhaustive.unwrap());
        }
    }

    #[test]
    fn small_sweeps() {
        let res = sweep_cell_size(&small(OutageCase::CaseI), &[100.0, 200.0, 300.0]).unwrap();
        assert_eq!(res.x_values(), vec![100.0, 200.0, 300.0]);
        for m in Method::ALL {
            let c: Vec<f64> = res.curve(m).into_iter().map(Option::unwrap).collect();
            assert!(c.windows(2).all(|w| w[0] < w[1]), "{m}: {c:?}");
        }
        let users = ScenarioConfig { num_subcarriers: 5, per_user: 1, ..small(OutageCase::CaseI) };
        let res = sweep_num_users(&users, &[6, 8, 10]).unwrap();
        assert_eq!(res.axis, SweepAxis::NumUsers);
        assert!(res.points.iter().all(|p| p.exhaustive.is_some() && p.exhaustive_above_proposed == 0));
        assert!(sweep_num_users(&users, &[5]).is_err());
        assert!(sweep_num_users(&users, &[]).is_err());
    }
}
