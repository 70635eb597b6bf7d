//! Scenario files: a strict TOML description of one experiment.
//!
//! ```toml
//! seed = 7
//! horizon = 100          # blocks, or rounds in network mode
//!
//! [agents]
//! count = 3
//!
//! [schedule]
//! preset = "bitcoin"
//!
//! [[checks]]
//! name = "positivity"
//! ```
//!
//! Unknown keys anywhere are errors.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::consensus::{TopologyKind, WorkRange};
use crate::reward::RewardSchedule;
use crate::value::library::{CheckParams, Library};
use crate::value::Sampler;
use crate::workload::{AgentPolicy, RewardPolicy, WorkloadConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}{}: {message}", .field.as_deref().map(|f| format!("field `{f}`")).unwrap_or_else(|| "scenario".into()), .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse {
        field: Option<String>,
        line: Option<usize>,
        message: String,
    },
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("bad topology: {0}")]
    BadTopology(String),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    fn field(field: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        ScenarioError::Parse {
            field: Some(field.to_owned()),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One ledger, one block per step.
    #[default]
    Ledger,
    /// Gossiping nodes, one round per step.
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    pub count: u64,
    pub policy: AgentPolicy,
    pub sends_per_block: usize,
    pub dormant_fraction: f64,
    pub reward_policy: RewardPolicy,
    /// Genesis balance of every agent; zero leaves genesis empty.
    pub initial_balance: i64,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        let w = WorkloadConfig::default();
        Self {
            count: w.agents,
            policy: w.policy,
            sends_per_block: w.sends_per_block,
            dormant_fraction: w.dormant_fraction,
            reward_policy: w.reward_policy,
            initial_balance: 0,
        }
    }
}

impl AgentsConfig {
    pub fn workload(&self) -> WorkloadConfig {
        WorkloadConfig {
            agents: self.count,
            policy: self.policy,
            sends_per_block: self.sends_per_block,
            dormant_fraction: self.dormant_fraction,
            reward_policy: self.reward_policy,
        }
    }
}

/// Either `preset = "bitcoin" | "none"` or a full schedule table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScheduleConfig {
    Bitcoin,
    None,
    Custom(RewardSchedule),
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Bitcoin
    }
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Option<RewardSchedule> {
        match self {
            ScheduleConfig::Bitcoin => Some(RewardSchedule::bitcoin()),
            ScheduleConfig::None => None,
            ScheduleConfig::Custom(s) => Some(s.clone()),
        }
    }
}

impl<'de> Deserialize<'de> for ScheduleConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let table = toml::Table::deserialize(d)?;
        if let Some(preset) = table.get("preset") {
            if table.len() > 1 {
                return Err(D::Error::custom("`preset` cannot be combined with other keys"));
            }
            return match preset.as_str() {
                Some("bitcoin") => Ok(ScheduleConfig::Bitcoin),
                Some("none") => Ok(ScheduleConfig::None),
                _ => Err(D::Error::custom(format!(
                    "unknown preset {preset}; expected \"bitcoin\" or \"none\""
                ))),
            };
        }
        let schedule: RewardSchedule = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| D::Error::custom(e.message()))?;
        Ok(ScheduleConfig::Custom(schedule))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// Nodes `0..n/2` against the rest.
    Halves,
    /// Each node joins one side uniformly at random.
    Random,
}

/// Links between the two sides are down for rounds `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub start: u64,
    pub end: u64,
    #[serde(default = "default_split")]
    pub split: Split,
}

fn default_split() -> Split {
    Split::Halves
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub min: u32,
    pub max: u32,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self { min: 1, max: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub nodes: usize,
    pub graph: TopologyKind,
    pub latency: LatencyConfig,
    pub finality_depth: Option<usize>,
    pub partitions: Vec<PartitionConfig>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            nodes: 10,
            graph: TopologyKind::Complete,
            latency: LatencyConfig::default(),
            finality_depth: None,
            partitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningConfig {
    pub probability: f64,
    pub work: WorkRange,
    pub sends_per_block: usize,
    /// Rounds at which some node gossips a deliberately invalid block.
    pub inject_invalid: Vec<u64>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            probability: 0.1,
            work: WorkRange::default(),
            sends_per_block: 0,
            inject_invalid: Vec::new(),
        }
    }
}

/// One value-function check and the domain it is checked over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub name: String,
    /// Column name in the trace; defaults to `name`.
    pub label: Option<String>,
    /// Contract to check against; defaults to the check's own.
    pub contract: Option<String>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub target: Option<f64>,
    pub accounts: Option<u64>,
    pub max_balance: Option<i64>,
    pub var_min: Option<i64>,
    pub var_max: Option<i64>,
    pub depth: Option<usize>,
    pub budget: Option<u64>,
    pub trajectories: Option<usize>,
    pub trajectory_len: Option<usize>,
}

pub const DEFAULT_CHECK_BUDGET: u64 = 200_000;

impl CheckConfig {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            label: None,
            contract: None,
            gamma: None,
            epsilon: None,
            target: None,
            accounts: None,
            max_balance: None,
            var_min: None,
            var_max: None,
            depth: None,
            budget: None,
            trajectories: None,
            trajectory_len: None,
        }
    }

    pub fn column(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn params(&self, schedule: Option<RewardSchedule>) -> CheckParams {
        CheckParams {
            gamma: self.gamma,
            epsilon: self.epsilon,
            target: self.target,
            schedule,
        }
    }

    pub fn sampler(&self, seed: u64) -> Sampler {
        let d = Sampler::default();
        Sampler {
            accounts: self.accounts.unwrap_or(d.accounts),
            max_balance: self.max_balance.unwrap_or(d.max_balance),
            var_range: match (self.var_min, self.var_max) {
                (None, None) => None,
                (lo, hi) => Some((lo.unwrap_or(0), hi.unwrap_or(0))),
            },
            height: d.height,
            depth: self.depth.unwrap_or(d.depth),
            seed,
            trajectories: self.trajectories.unwrap_or(d.trajectories),
            trajectory_len: self.trajectory_len.unwrap_or(d.trajectory_len),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or(DEFAULT_CHECK_BUDGET)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Trace file; standard output when absent.
    pub trace: Option<String>,
    pub format: TraceFormat,
    /// Where counterexamples are written as JSON lines.
    pub counterexamples: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode: Mode,
    #[serde(alias = "blocks", alias = "rounds")]
    horizon: toml::Spanned<i64>,
    #[serde(default)]
    agents: AgentsConfig,
    #[serde(default)]
    schedule: ScheduleConfig,
    #[serde(default)]
    topology: TopologyConfig,
    #[serde(default)]
    mining: MiningConfig,
    #[serde(default)]
    checks: Vec<CheckConfig>,
    #[serde(default)]
    output: OutputConfig,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub seed: u64,
    pub mode: Mode,
    pub horizon: u64,
    pub agents: AgentsConfig,
    pub schedule: ScheduleConfig,
    pub topology: TopologyConfig,
    pub mining: MiningConfig,
    pub checks: Vec<CheckConfig>,
    pub output: OutputConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Pulls the offending key out of a TOML error, when it names one.
fn field_of(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_owned())
}

impl Scenario {
    pub fn from_toml(text: &str, library: &Library) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            field: field_of(e.message()),
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().trim().to_owned(),
        })?;
        let horizon_line = Some(line_of(text, raw.horizon.span().start));
        let horizon = *raw.horizon.get_ref();
        if horizon < 1 {
            return Err(ScenarioError::field(
                "horizon",
                horizon_line,
                format!("must be at least 1, got {horizon}"),
            ));
        }
        let scenario = Scenario {
            seed: raw.seed,
            mode: raw.mode,
            horizon: horizon as u64,
            agents: raw.agents,
            schedule: raw.schedule,
            topology: raw.topology,
            mining: raw.mining,
            checks: raw.checks,
            output: raw.output,
        };
        scenario.validate(library)?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path, library: &Library) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, library)
    }

    /// Checks every cross-field constraint and that all names resolve.
    pub fn validate(&self, library: &Library) -> Result<(), ScenarioError> {
        let a = &self.agents;
        if !(0.0..=1.0).contains(&a.dormant_fraction) {
            return Err(ScenarioError::field(
                "agents.dormant_fraction",
                None,
                "must lie in [0, 1]",
            ));
        }
        if a.initial_balance < 0 {
            return Err(ScenarioError::field(
                "agents.initial_balance",
                None,
                "must be non-negative",
            ));
        }
        if let Some(s) = self.schedule.schedule() {
            s.validate()
                .map_err(|e| ScenarioError::field("schedule", None, e.to_string()))?;
        }
        let m = &self.mining;
        if !(0.0..=1.0).contains(&m.probability) {
            return Err(ScenarioError::field("mining.probability", None, "must lie in [0, 1]"));
        }
        m.work
            .validate()
            .map_err(|e| ScenarioError::field("mining.work", None, e.to_string()))?;

        if self.mode == Mode::Network {
            let t = &self.topology;
            if t.nodes < 2 {
                return Err(ScenarioError::BadTopology(format!(
                    "a network needs at least 2 nodes, got {}",
                    t.nodes
                )));
            }
            if let TopologyKind::Random { edge_probability } = t.graph {
                if !(0.0..=1.0).contains(&edge_probability) {
                    return Err(ScenarioError::BadTopology(format!(
                        "edge probability {edge_probability} is outside [0, 1]"
                    )));
                }
            }
            if t.latency.min == 0 || t.latency.max < t.latency.min {
                return Err(ScenarioError::BadTopology(
                    "latency must satisfy 1 <= min <= max".into(),
                ));
            }
            for p in &t.partitions {
                if p.end <= p.start {
                    return Err(ScenarioError::BadTopology(format!(
                        "partition ends (round {}) before it starts (round {})",
                        p.end, p.start
                    )));
                }
            }
        }

        let mut columns = BTreeSet::new();
        for c in &self.checks {
            if !library.has_check(&c.name) {
                return Err(ScenarioError::UnknownCheck(c.name.clone()));
            }
            if let Some(contract) = &c.contract {
                if !library.has_contract(contract) {
                    return Err(ScenarioError::UnknownContract(contract.clone()));
                }
            }
            if ["k", "y", "n_k", "tx_count", "agreement"].contains(&c.column())
                || !columns.insert(c.column().to_owned())
            {
                return Err(ScenarioError::field(
                    "checks.label",
                    None,
                    format!("column `{}` is already in the trace", c.column()),
                ));
            }
            if let Some(g) = c.gamma {
                if !(0.0..1.0).contains(&g) {
                    return Err(ScenarioError::field("checks.gamma", None, "must lie in [0, 1)"));
                }
            }
            if c.epsilon.is_some_and(|e| e < 0.0) {
                return Err(ScenarioError::field("checks.epsilon", None, "must be non-negative"));
            }
            if c.var_min.unwrap_or(0) > c.var_max.unwrap_or(0) {
                return Err(ScenarioError::field("checks.var_min", None, "exceeds var_max"));
            }
        }
        Ok(())
    }

    /// Adds a check by name with default parameters.
    pub fn add_check(&mut self, name: &str, library: &Library) -> Result<(), ScenarioError> {
        if self.checks.iter().any(|c| c.column() == name) {
            return Ok(());
        }
        self.checks.push(CheckConfig::named(name));
        self.validate(library)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml(text, &Library::builtin())
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse(
            "seed = 1\nhorizon = 10\n[agents]\ncount = 3\n[schedule]\npreset = \"bitcoin\"\n",
        )
        .unwrap();
        assert_eq!(s.horizon, 10);
        assert_eq!(s.agents.count, 3);
        assert_eq!(s.mode, Mode::Ledger);
        assert_eq!(s.schedule, ScheduleConfig::Bitcoin);
        assert_eq!(s.output.format, TraceFormat::Csv);
    }

    #[test]
    fn blocks_alias_and_custom_schedule() {
        let s = parse(
            "blocks = 5\n[schedule]\ntype = \"constant\"\nreward = 7\n",
        )
        .unwrap();
        assert_eq!(s.horizon, 5);
        assert_eq!(s.schedule.schedule().unwrap().mu(3), 7);
    }

    #[test]
    fn checks_resolve() {
        let s = parse("horizon = 2\n[[checks]]\nname = \"supply-invariant\"\n").unwrap();
        assert_eq!(s.checks[0].name, "supply-invariant");
        assert!(matches!(
            parse("horizon = 2\n[[checks]]\nname = \"nonsense\"\n"),
            Err(ScenarioError::UnknownCheck(n)) if n == "nonsense"
        ));
    }

    #[test]
    fn negative_horizon_names_the_field() {
        match parse("seed = 1\nhorizon = -3\n") {
            Err(ScenarioError::Parse { field, line, .. }) => {
                assert_eq!(field.as_deref(), Some("horizon"));
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        match parse("horizon = 2\n[agents]\ncuont = 3\n") {
            Err(ScenarioError::Parse { field, line, .. }) => {
                assert_eq!(field.as_deref(), Some("cuont"));
                assert_eq!(line, Some(3));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("horizon = 2\nextra = true\n").is_err());
    }

    #[test]
    fn bad_topology() {
        let r = parse("mode = \"network\"\nhorizon = 2\n[topology]\nnodes = 1\n");
        assert!(matches!(r, Err(ScenarioError::BadTopology(_))));
        let r = parse(
            "mode = \"network\"\nhorizon = 2\n[topology]\nnodes = 4\ngraph = { kind = \"random\", edge_probability = 1.5 }\n",
        );
        assert!(matches!(r, Err(ScenarioError::BadTopology(_))));
    }
}
