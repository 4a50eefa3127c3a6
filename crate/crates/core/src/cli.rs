//! The `mcnoma` command line.
//!
//! Every subcommand writes a table of rows, either as CSV with a header row or
//! as a JSON array of objects with the same field names. The first column of
//! every table is `schema_version`. Settings come from flags, then from the
//! flat TOML file given with `--config`, then from built-in defaults.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channel::{compute_beta, SystemParams, UserProfile};
use crate::experiments::{
    generate_scenario, oma_user_power, sweep_cell_size, sweep_num_users, Method, OutageCase, ScenarioConfig,
    SweepResult,
};
use crate::montecarlo::{
    closed_form_outage, closed_form_single_outage, samples_for_outage, simulate_pair_outage, simulate_single_outage,
    LinkUser, OutageEstimate, DEFAULT_SAMPLES,
};
use crate::power::{noma_gain_over_oma, oma_pair_power, sic_order_rule, solve_case, solve_pair, SicUser, VirtualUser};
use crate::rng::{stream, Purpose};
use crate::scheduling::{schedule_exhaustive_virtual, schedule_proposed_virtual, schedule_random_virtual, Schedule, Slot};

/// Version of the output tables.
pub const SCHEMA_VERSION: u32 = 1;

/// Standard errors above the requirement at which `verify` flags a user.
pub const VIOLATION_SIGMAS: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(name = "mcnoma", version, about = "Power-minimal NOMA pairing and scheduling from channel statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power allocation of two users on one subcarrier, with the OMA comparison.
    Pair(PairArgs),
    /// Assign users to subcarriers and print the powers.
    Schedule(ScheduleArgs),
    /// Monte Carlo outage check of a schedule.
    Verify(VerifyArgs),
    /// Mean total power versus cell size.
    SweepCellsize(SweepArgs),
    /// Mean total power versus number of users.
    SweepUsers(SweepArgs),
}

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown format `{s}`, expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// csv or json.
    #[arg(long)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Flat TOML file of defaults; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of users K.
    #[arg(long)]
    pub users: Option<usize>,
    /// Number of subcarriers M.
    #[arg(long)]
    pub subcarriers: Option<usize>,
    /// Subcarriers per user L.
    #[arg(long)]
    pub per_user: Option<usize>,
    /// Cell radius in meters.
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Outage requirements: 1 (all 1e-2) or 2 (uniform in [1e-5, 0.1]).
    #[arg(long = "case", value_parser = clap::value_parser!(u8).range(1..=2))]
    pub case: Option<u8>,
    /// Noise power per subcarrier in dBm.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_dbm: Option<f64>,
    /// Path-loss exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of random realizations.
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Seed of every random stream. Defaults to 0; sweeps require it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// proposed, exhaustive, random or oma.
    #[arg(long)]
    pub method: Option<Method>,
    /// CSV of users instead of a random draw. Columns: `id` and either
    /// `distance_m,total_rate,outage` or `beta,target_sinr`.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Monte Carlo trials per subcarrier (raised automatically for rare targets).
    #[arg(long)]
    pub samples: Option<u64>,
    /// Multiplies every allocated power before simulating.
    #[arg(long)]
    pub power_scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Swept values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Restrict the output to one method.
    #[arg(long)]
    pub method: Option<Method>,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    /// Per-subcarrier target rate of user a, bit/s/Hz.
    #[arg(long)]
    pub rate_a: Option<f64>,
    #[arg(long)]
    pub rate_b: Option<f64>,
    /// Target SINR of user a (instead of --rate-a).
    #[arg(long)]
    pub sinr_a: Option<f64>,
    #[arg(long)]
    pub sinr_b: Option<f64>,
    /// Distance of user a in meters.
    #[arg(long)]
    pub distance_a: Option<f64>,
    #[arg(long)]
    pub distance_b: Option<f64>,
    /// Outage requirement of user a.
    #[arg(long)]
    pub outage_a: Option<f64>,
    #[arg(long)]
    pub outage_b: Option<f64>,
    /// QoS-stringency coefficient of user a in 1/W (instead of distance and outage).
    #[arg(long)]
    pub beta_a: Option<f64>,
    #[arg(long)]
    pub beta_b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub noise_dbm: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub users: Option<usize>,
    pub subcarriers: Option<usize>,
    pub per_user: Option<usize>,
    pub cell_size: Option<f64>,
    pub case: Option<u8>,
    pub noise_dbm: Option<f64>,
    pub alpha: Option<f64>,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub power_scale: Option<f64>,
    pub method: Option<String>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub values: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    fn method(&self) -> anyhow::Result<Option<Method>> {
        self.method.as_deref().map(Method::from_str).transpose().map_err(anyhow::Error::msg)
    }

    fn format(&self) -> anyhow::Result<Option<Format>> {
        self.format.as_deref().map(Format::from_str).transpose().map_err(anyhow::Error::msg)
    }
}

/// Settings after merging flags, config file and defaults.
#[derive(Debug, Clone)]
struct Resolved {
    scenario: ScenarioConfig,
    seed_given: bool,
    format: Format,
    out: Option<PathBuf>,
    file: FileConfig,
}

fn resolve(args: &ScenarioArgs, defaults: ScenarioConfig) -> anyhow::Result<Resolved> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let case = args.case.or(file.case);
    let outage_case = match case {
        Some(n) => OutageCase::from_number(n)?,
        None => defaults.outage_case,
    };
    let seed = args.seed.or(file.seed);
    let scenario = ScenarioConfig {
        num_users: args.users.or(file.users).unwrap_or(defaults.num_users),
        num_subcarriers: args.subcarriers.or(file.subcarriers).unwrap_or(defaults.num_subcarriers),
        per_user: args.per_user.or(file.per_user).unwrap_or(defaults.per_user),
        cell_size: args.cell_size.or(file.cell_size).unwrap_or(defaults.cell_size),
        outage_case,
        noise_dbm: args.noise_dbm.or(file.noise_dbm).unwrap_or(defaults.noise_dbm),
        alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        realizations: args.realizations.or(file.realizations).unwrap_or(defaults.realizations),
        seed: seed.unwrap_or(defaults.seed),
    };
    let format = match args.output.format {
        Some(f) => f,
        None => file.format()?.unwrap_or(Format::Csv),
    };
    let out = args.output.out.clone().or_else(|| file.out.clone());
    Ok(Resolved { scenario, seed_given: seed.is_some(), format, out, file })
}

/// Writes `rows` in `format` to `out` or standard output.
pub fn write_rows<T: Serialize>(rows: &[T], format: Format, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            let mut w = BufWriter::new(file);
            encode_rows(rows, format, &mut w)?;
            w.flush().with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            encode_rows(rows, format, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

/// Encodes rows as CSV (header row, comma separated) or a JSON array.
pub fn encode_rows<T: Serialize, W: Write>(rows: &[T], format: Format, w: &mut W) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            for row in rows {
                csv.serialize(row)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// One line of `pair` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub schema_version: u32,
    /// `sic_a`, `sic_b`, `selected`, `oma`, `gain` or `gain_closed_form`.
    pub row: String,
    pub sic_user: Option<String>,
    pub power_a_watts: Option<f64>,
    pub power_b_watts: Option<f64>,
    pub total_watts: Option<f64>,
    pub note: String,
}

/// One line of `schedule` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub schema_version: u32,
    /// `single`, `pair`, `oma` or `total`.
    pub kind: String,
    pub subcarrier: Option<usize>,
    pub user_a: Option<usize>,
    pub replica_a: Option<usize>,
    pub user_b: Option<usize>,
    pub replica_b: Option<usize>,
    pub power_a_watts: Option<f64>,
    pub power_b_watts: Option<f64>,
    pub sic_user: Option<String>,
    pub total_watts: f64,
}

/// One line of `verify` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub schema_version: u32,
    pub subcarrier: usize,
    pub user: usize,
    pub replica: usize,
    pub power_watts: f64,
    pub required_outage: f64,
    pub analytic_outage: f64,
    pub empirical_outage: f64,
    pub std_error: f64,
    pub samples: u64,
    pub sigmas_above_required: f64,
    pub violation: bool,
}

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schema_version: u32,
    /// `cell_size_m` or `num_users`.
    pub axis: String,
    pub outage_case: u8,
    pub x: f64,
    pub method: String,
    /// Empty where the method did not run.
    pub mean_watts: Option<f64>,
    pub mean_dbm: Option<f64>,
    pub std_error: Option<f64>,
    pub realizations: usize,
}

/// Flattens a sweep result into output rows, optionally keeping one method.
pub fn sweep_rows(result: &SweepResult, case: OutageCase, only: Option<Method>) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for p in &result.points {
        for m in Method::ALL {
            if only.is_some_and(|o| o != m) {
                continue;
            }
            let s = p.method(m);
            rows.push(SweepRow {
                schema_version: SCHEMA_VERSION,
                axis: result.axis.label().to_string(),
                outage_case: case.number(),
                x: p.x,
                method: m.name().to_string(),
                mean_watts: s.map(|s| s.mean_watts),
                mean_dbm: s.map(|s| s.mean_dbm),
                std_error: s.map(|s| s.std_error),
                realizations: s.map_or(0, |s| s.realizations),
            });
        }
    }
    rows
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Pair(args) => {
            let rows = pair_rows(&args)?;
            write_rows(&rows, args.output.format.unwrap_or(Format::Csv), args.output.out.as_deref())
        }
        Command::Schedule(args) => cmd_schedule(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::SweepCellsize(args) => cmd_sweep(&args, SweepKind::CellSize),
        Command::SweepUsers(args) => cmd_sweep(&args, SweepKind::Users),
    }
}

fn pair_user(
    name: &str,
    rate: Option<f64>,
    sinr: Option<f64>,
    distance: Option<f64>,
    outage: Option<f64>,
    beta: Option<f64>,
    params: &SystemParams,
) -> anyhow::Result<VirtualUser> {
    let beta = match (beta, distance, outage) {
        (Some(b), None, None) => b,
        (None, Some(d), Some(o)) => compute_beta(d, o, params)?,
        (Some(_), _, _) => bail!("user {name}: give either --beta-{name} or --distance-{name} with --outage-{name}"),
        _ => bail!("user {name}: needs --beta-{name}, or --distance-{name} and --outage-{name}"),
    };
    let id = if name == "a" { 1 } else { 2 };
    Ok(match (rate, sinr) {
        (Some(r), None) => VirtualUser::new(id, 0, r, beta)?,
        (None, Some(g)) => VirtualUser::with_target_sinr(id, 0, g, beta)?,
        _ => bail!("user {name}: give exactly one of --rate-{name} and --sinr-{name}"),
    })
}

/// Rows printed by `pair`.
pub fn pair_rows(args: &PairArgs) -> anyhow::Result<Vec<PairRow>> {
    let params = SystemParams::from_dbm(args.noise_dbm.unwrap_or(-128.0), args.alpha.unwrap_or(3.6))?;
    let a = pair_user("a", args.rate_a, args.sinr_a, args.distance_a, args.outage_a, args.beta_a, &params)?;
    let b = pair_user("b", args.rate_b, args.sinr_b, args.distance_b, args.outage_b, args.beta_b, &params)?;
    let row = |row: &str, sic: Option<SicUser>, pa: Option<f64>, pb: Option<f64>, total: Option<f64>, note: String| PairRow {
        schema_version: SCHEMA_VERSION,
        row: row.to_string(),
        sic_user: sic.map(|s| s.to_string()),
        power_a_watts: pa,
        power_b_watts: pb,
        total_watts: total,
        note,
    };
    let mut rows = Vec::new();
    for sic in [SicUser::A, SicUser::B] {
        let s = solve_case(&a, &b, sic)?;
        rows.push(row(&format!("sic_{sic}"), Some(sic), Some(s.power_a), Some(s.power_b), Some(s.total), String::new()));
    }
    let best = solve_pair(&a, &b)?;
    let rule_note = match sic_order_rule(&a, &b) {
        Ok(u) if u == best.sic_user => format!("decoding-order rule agrees: user {u} performs SIC"),
        Ok(u) => format!("decoding-order rule picks user {u}, cheaper case differs"),
        Err(_) => "decoding-order shortcut disabled: a target SINR is below 1, both cases compared".to_string(),
    };
    rows.push(row("selected", Some(best.sic_user), Some(best.power_a), Some(best.power_b), Some(best.total), rule_note));
    let (oa, ob) = oma_pair_power(&a, &b)?;
    rows.push(row("oma", None, Some(oa), Some(ob), Some(oa + ob), "each user on half the band".to_string()));
    let gain = noma_gain_over_oma(&a, &b)?;
    rows.push(row("gain", None, None, None, Some(gain.gain), "OMA total minus NOMA total".to_string()));
    let closed_note = if gain.closed_form.is_some() {
        "closed-form gain".to_string()
    } else {
        "closed-form gain needs both per-subcarrier rates >= 1".to_string()
    };
    rows.push(row("gain_closed_form", None, None, None, gain.closed_form, closed_note));
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct ProfileRecord {
    id: usize,
    distance_m: Option<f64>,
    total_rate: Option<f64>,
    outage: Option<f64>,
    beta: Option<f64>,
    target_sinr: Option<f64>,
}

/// Users of a `schedule` or `verify` run.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    /// Users with position and QoS target.
    Physical(Vec<UserProfile>),
    /// Users given directly by per-subcarrier `(id, beta, target_sinr)`.
    Direct(Vec<(usize, f64, f64)>),
}

impl Population {
    pub fn len(&self) -> usize {
        match self {
            Self::Physical(p) => p.len(),
            Self::Direct(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn virtual_users(&self, per_user: usize) -> crate::Result<Vec<VirtualUser>> {
        match self {
            Self::Physical(p) => VirtualUser::expand(p, per_user),
            Self::Direct(d) => d
                .iter()
                .flat_map(|&(id, beta, g)| (0..per_user).map(move |r| VirtualUser::with_target_sinr(id, r, g, beta)))
                .collect(),
        }
    }
}

/// Reads a users CSV.
pub fn read_profiles(path: &Path, params: &SystemParams) -> anyhow::Result<Population> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let records: Vec<ProfileRecord> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid users file {}", path.display()))?;
    if records.is_empty() {
        bail!("users file {} has no rows", path.display());
    }
    if records.iter().all(|r| r.distance_m.is_some() && r.total_rate.is_some() && r.outage.is_some()) {
        let profiles = records
            .iter()
            .map(|r| UserProfile::new(r.id, r.distance_m.unwrap(), r.total_rate.unwrap(), r.outage.unwrap(), params))
            .collect::<crate::Result<Vec<_>>>()?;
        return Ok(Population::Physical(profiles));
    }
    if records.iter().all(|r| r.beta.is_some() && r.target_sinr.is_some()) {
        return Ok(Population::Direct(
            records.iter().map(|r| (r.id, r.beta.unwrap(), r.target_sinr.unwrap())).collect(),
        ));
    }
    bail!("users file {}: every row needs distance_m, total_rate and outage, or beta and target_sinr", path.display())
}

struct ScheduleSetup {
    resolved: Resolved,
    population: Population,
    method: Method,
}

fn schedule_setup(args: &ScheduleArgs) -> anyhow::Result<ScheduleSetup> {
    let mut resolved = resolve(&args.scenario, ScenarioConfig { realizations: 1, ..Default::default() })?;
    let method = match args.method {
        Some(m) => m,
        None => resolved.file.method()?.unwrap_or(Method::Proposed),
    };
    let params = resolved.scenario.params()?;
    let population = match args.profiles.clone().or_else(|| resolved.file.profiles.clone()) {
        Some(path) => {
            let population = read_profiles(&path, &params)?;
            resolved.scenario.num_users = population.len();
            population
        }
        None => {
            let mut rng = stream(resolved.scenario.seed, Purpose::Scenario, 0);
            Population::Physical(generate_scenario(&resolved.scenario, &mut rng)?)
        }
    };
    Ok(ScheduleSetup { resolved, population, method })
}

fn build_schedule(setup: &ScheduleSetup) -> anyhow::Result<Schedule> {
    let cfg = &setup.resolved.scenario;
    let users = setup.population.virtual_users(cfg.per_user)?;
    let m = cfg.num_subcarriers;
    Ok(match setup.method {
        Method::Proposed => schedule_proposed_virtual(users, m)?,
        Method::Exhaustive => schedule_exhaustive_virtual(users, m)?.schedule,
        Method::Random => {
            let mut rng = stream(cfg.seed, Purpose::RandomSchedule, 0);
            schedule_random_virtual(users, m, &mut rng)?
        }
        Method::Oma => bail!("oma does not produce a subcarrier schedule"),
    })
}

/// Rows printed by `schedule`.
pub fn schedule_rows(args: &ScheduleArgs) -> anyhow::Result<(Vec<ScheduleRow>, Format, Option<PathBuf>)> {
    let setup = schedule_setup(args)?;
    let cfg = setup.resolved.scenario;
    let empty = ScheduleRow {
        schema_version: SCHEMA_VERSION,
        kind: String::new(),
        subcarrier: None,
        user_a: None,
        replica_a: None,
        user_b: None,
        replica_b: None,
        power_a_watts: None,
        power_b_watts: None,
        sic_user: None,
        total_watts: 0.0,
    };
    let mut rows = Vec::new();
    let total = if setup.method == Method::Oma {
        cfg.load()?;
        let users = setup.population.virtual_users(1)?;
        let mut total = 0.0;
        for u in &users {
            let power = oma_user_power(u.per_sc_rate * cfg.per_user as f64, u.beta, cfg.num_users, cfg.num_subcarriers)?;
            total += power;
            rows.push(ScheduleRow {
                kind: "oma".into(),
                user_a: Some(u.user_id),
                power_a_watts: Some(power),
                total_watts: power,
                ..empty.clone()
            });
        }
        total
    } else {
        let schedule = build_schedule(&setup)?;
        for (k, slot) in schedule.slots.iter().enumerate() {
            let u = |i: usize| &schedule.users[i];
            rows.push(match *slot {
                Slot::Single { user, power } => ScheduleRow {
                    kind: "single".into(),
                    subcarrier: Some(k + 1),
                    user_a: Some(u(user).user_id),
                    replica_a: Some(u(user).replica),
                    power_a_watts: Some(power),
                    total_watts: power,
                    ..empty.clone()
                },
                Slot::Pair { a, b, solution } => ScheduleRow {
                    kind: "pair".into(),
                    subcarrier: Some(k + 1),
                    user_a: Some(u(a).user_id),
                    replica_a: Some(u(a).replica),
                    user_b: Some(u(b).user_id),
                    replica_b: Some(u(b).replica),
                    power_a_watts: Some(solution.power_a),
                    power_b_watts: Some(solution.power_b),
                    sic_user: Some(solution.sic_user.to_string()),
                    total_watts: solution.total,
                    ..empty.clone()
                },
            });
        }
        schedule.total_power
    };
    rows.push(ScheduleRow { kind: "total".into(), total_watts: total, ..empty });
    Ok((rows, setup.resolved.format, setup.resolved.out))
}

fn cmd_schedule(args: &ScheduleArgs) -> anyhow::Result<()> {
    let (rows, format, out) = schedule_rows(args)?;
    write_rows(&rows, format, out.as_deref())
}

/// Rows printed by `verify`.
pub fn verify_rows(args: &VerifyArgs) -> anyhow::Result<(Vec<VerifyRow>, Format, Option<PathBuf>)> {
    let setup = schedule_setup(&args.schedule)?;
    let Population::Physical(profiles) = &setup.population else {
        bail!("verify needs users with distance_m, total_rate and outage");
    };
    let cfg = setup.resolved.scenario;
    let params = cfg.params()?;
    let samples = args.samples.or(setup.resolved.file.samples).unwrap_or(DEFAULT_SAMPLES);
    let scale = args.power_scale.or(setup.resolved.file.power_scale).unwrap_or(1.0);
    if samples == 0 {
        bail!("--samples must be positive");
    }
    if !(scale > 0.0 && scale.is_finite()) {
        bail!("--power-scale must be positive, got {scale}");
    }
    let schedule = build_schedule(&setup)?;
    let link = |i: usize| -> anyhow::Result<(LinkUser, &UserProfile)> {
        let u = schedule.users[i];
        let p = profiles.iter().find(|p| p.id == u.user_id).context("scheduled user missing from profiles")?;
        Ok((LinkUser::new(u, p.distance)?, p))
    };
    let row = |k: usize, l: &LinkUser, p: &UserProfile, power: f64, analytic: f64, est: OutageEstimate| {
        let sigmas = est.excess_sigmas(p.outage_req);
        VerifyRow {
            schema_version: SCHEMA_VERSION,
            subcarrier: k + 1,
            user: l.user.user_id,
            replica: l.user.replica,
            power_watts: power,
            required_outage: p.outage_req,
            analytic_outage: analytic,
            empirical_outage: est.outage_rate,
            std_error: est.std_error,
            samples: est.samples,
            sigmas_above_required: sigmas,
            violation: sigmas > VIOLATION_SIGMAS,
        }
    };
    let mut rows = Vec::new();
    for (k, slot) in schedule.slots.iter().enumerate() {
        let mut rng = stream(cfg.seed, Purpose::Fading, k as u64);
        match *slot {
            Slot::Single { user, power } => {
                let (l, p) = link(user)?;
                let power = power * scale;
                let n = samples_for_outage(p.outage_req, samples);
                let est = simulate_single_outage(power, &l, &params, n, &mut rng)?;
                rows.push(row(k, &l, p, power, closed_form_single_outage(power, &l, &params)?, est));
            }
            Slot::Pair { a, b, solution } => {
                let ((la, pa), (lb, pb)) = (link(a)?, link(b)?);
                let sol = solution.scaled(scale);
                let n = samples_for_outage(pa.outage_req.min(pb.outage_req), samples);
                let est = simulate_pair_outage(&sol, &la, &lb, &params, n, &mut rng)?;
                let (oa, ob) = closed_form_outage(&sol, &la, &lb, &params)?;
                rows.push(row(k, &la, pa, sol.power_a, oa, est.a));
                rows.push(row(k, &lb, pb, sol.power_b, ob, est.b));
            }
        }
    }
    Ok((rows, setup.resolved.format, setup.resolved.out))
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<()> {
    let (rows, format, out) = verify_rows(args)?;
    let flagged = rows.iter().filter(|r| r.violation).count();
    write_rows(&rows, format, out.as_deref())?;
    eprintln!("{flagged} of {} users above their outage requirement by more than {VIOLATION_SIGMAS} standard errors", rows.len());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    CellSize,
    Users,
}

impl SweepKind {
    pub fn defaults(self) -> (ScenarioConfig, Vec<f64>) {
        match self {
            Self::CellSize => (
                ScenarioConfig { num_users: 4, num_subcarriers: 5, per_user: 2, ..Default::default() },
                (0..6).map(|k| 100.0 + 50.0 * k as f64).collect(),
            ),
            Self::Users => (
                ScenarioConfig { num_users: 6, num_subcarriers: 5, per_user: 1, cell_size: 200.0, ..Default::default() },
                (6..=10).map(f64::from).collect(),
            ),
        }
    }
}

/// Rows written by the sweep subcommands.
pub fn sweep_output(args: &SweepArgs, kind: SweepKind) -> anyhow::Result<(Vec<SweepRow>, Format, Option<PathBuf>)> {
    let (defaults, default_values) = kind.defaults();
    let resolved = resolve(&args.scenario, defaults)?;
    if !resolved.seed_given {
        bail!("sweeps need an explicit --seed (or `seed` in the config file)");
    }
    let method = match args.method {
        Some(m) => Some(m),
        None => resolved.file.method()?,
    };
    let values = args.values.clone().or_else(|| resolved.file.values.clone()).unwrap_or(default_values);
    let template = resolved.scenario;
    let result = match kind {
        SweepKind::CellSize => sweep_cell_size(&template, &values)?,
        SweepKind::Users => {
            let counts = values
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(anyhow::anyhow!("user counts must be positive integers, got {v}"))
                    }
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            sweep_num_users(&template, &counts)?
        }
    };
    Ok((sweep_rows(&result, template.outage_case, method), resolved.format, resolved.out))
}

fn cmd_sweep(args: &SweepArgs, kind: SweepKind) -> anyhow::Result<()> {
    let (rows, format, out) = sweep_output(args, kind)?;
    write_rows(&rows, format, out.as_deref())
}
