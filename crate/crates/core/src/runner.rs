//! Executes a [`Scenario`]: runs its checks, drives the ledger or network
//! for the horizon, and collects one [`TraceRecord`] per step.

use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::consensus::{ConsensusError, MiningPolicy, NetworkTopology, NodeId};
use crate::ledger::{apply_block, replay_chain, AccountId, LedgerState, Rules, TransactionBlock};
use crate::reward::RewardEvent;
use crate::scenario::{Mode, Scenario, Split};
use crate::trace::TraceRecord;
use crate::value::library::Library;
use crate::value::{check, check_controller, CheckError, CheckReport, ValueFunctionSpec, ValueKind};
use crate::workload::Workload;

/// An independent generator for one named consumer of randomness, so that
/// e.g. adding a check never shifts the workload's draws.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(name.as_bytes());
    let bytes: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(bytes)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("check `{check}`: {source}")]
    Check { check: String, source: CheckError },
    #[error("`{0}` does not name a registered check or contract")]
    Unresolved(String),
    #[error(transparent)]
    Topology(#[from] ConsensusError),
}

/// A block or chain that failed validation during the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityViolation {
    pub step: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub columns: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub checks: Vec<CheckReport>,
    pub violations: Vec<ValidityViolation>,
    /// Controller checks whose traced `V` broke `V(k) ≤ γ^k V(0)`.
    pub tracking: Vec<TrackingFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingFailure {
    pub check: String,
    pub step: u64,
    pub v: f64,
    pub bound: f64,
}

impl RunOutcome {
    /// Every check passed and nothing invalid was produced.
    pub fn success(&self) -> bool {
        self.violations.is_empty()
            && self.tracking.is_empty()
            && self.checks.iter().all(CheckReport::passed)
    }
}

struct Checks {
    columns: Vec<String>,
    specs: Vec<ValueFunctionSpec>,
    reports: Vec<CheckReport>,
}

impl Checks {
    fn values(&self, state: &LedgerState) -> Vec<f64> {
        self.specs.iter().map(|v| v.eval(state)).collect()
    }
}

fn run_checks(scenario: &Scenario, library: &Library, x0: &LedgerState) -> Result<Checks, RunError> {
    let schedule = scenario.schedule.schedule();
    let mut out = Checks {
        columns: Vec::new(),
        specs: Vec::new(),
        reports: Vec::new(),
    };
    for c in &scenario.checks {
        let params = c.params(schedule.clone());
        let err = |source| RunError::Check {
            check: c.column().to_owned(),
            source,
        };
        let spec = library
            .check(&c.name, &params)
            .ok_or_else(|| RunError::Unresolved(c.name.clone()))?;
        let contract_name = c
            .contract
            .as_deref()
            .or_else(|| library.default_contract(&c.name))
            .unwrap_or("transfer");
        let contract = library
            .contract(contract_name, &params)
            .ok_or_else(|| RunError::Unresolved(contract_name.to_owned()))?;
        let seed = substream(scenario.seed, &format!("check/{}", c.column())).next_u64();
        let sampler = c.sampler(seed);
        let mut report = match spec.kind {
            ValueKind::Controller { .. } => check_controller(&spec, &contract, &sampler, c.budget(), x0),
            _ => check(&spec, &contract, &sampler, c.budget()),
        }
        .map_err(err)?;
        report.check = c.column().to_owned();
        out.columns.push(c.column().to_owned());
        out.specs.push(spec);
        out.reports.push(report);
    }
    Ok(out)
}

fn agent_genesis(count: u64, balance: i64) -> LedgerState {
    if balance > 0 {
        LedgerState::from_balances((0..count).map(|i| (AccountId(i), balance)))
    } else {
        LedgerState::genesis()
    }
}

fn genesis(scenario: &Scenario) -> LedgerState {
    match scenario.mode {
        Mode::Ledger => agent_genesis(scenario.agents.count, scenario.agents.initial_balance),
        Mode::Network => agent_genesis(scenario.topology.nodes as u64, scenario.agents.initial_balance),
    }
}

pub fn run(scenario: &Scenario, library: &Library) -> Result<RunOutcome, RunError> {
    let x0 = genesis(scenario);
    let checks = run_checks(scenario, library, &x0)?;
    let mut outcome = RunOutcome {
        columns: checks.columns.clone(),
        records: Vec::with_capacity(scenario.horizon as usize),
        checks: checks.reports.clone(),
        violations: Vec::new(),
        tracking: Vec::new(),
    };
    match scenario.mode {
        Mode::Ledger => run_ledger(scenario, x0.clone(), &checks, &mut outcome),
        Mode::Network => run_network(scenario, x0.clone(), &checks, &mut outcome)?,
    }
    outcome.tracking = tracking_failures(&checks, &x0, &outcome.records);
    Ok(outcome)
}

fn tracking_failures(checks: &Checks, x0: &LedgerState, records: &[TraceRecord]) -> Vec<TrackingFailure> {
    let mut out = Vec::new();
    for (i, spec) in checks.specs.iter().enumerate() {
        let ValueKind::Controller { gamma, .. } = spec.kind else {
            continue;
        };
        let v0 = spec.eval(x0);
        let mut bound = v0;
        for r in records {
            bound *= gamma;
            if !spec.le(r.values[i], bound) {
                out.push(TrackingFailure {
                    check: checks.columns[i].clone(),
                    step: r.k,
                    v: r.values[i],
                    bound,
                });
                break;
            }
        }
    }
    out
}

fn run_ledger(scenario: &Scenario, mut state: LedgerState, checks: &Checks, outcome: &mut RunOutcome) {
    let mut workload_rng = substream(scenario.seed, "workload");
    let mut mining_rng = substream(scenario.seed, "mining");
    let workload = Workload::new(scenario.agents.workload(), &mut workload_rng);
    let schedule = scenario.schedule.schedule();
    let rules = Rules {
        schedule: schedule.clone(),
        ..Rules::default()
    };

    for k in 1..=scenario.horizon {
        let txs = workload.block_transactions(&state, &mut workload_rng);
        let mu = schedule.as_ref().map_or(0, |s| s.mu(k));
        let reward = if mu > 0 {
            RewardEvent::new(mu, workload.reward_distribution(&mut mining_rng))
        } else {
            RewardEvent::none()
        };
        let block = TransactionBlock::new(k, txs, reward);
        match apply_block(&state, &block, &rules) {
            Ok(next) => state = next,
            Err(e) => {
                outcome.violations.push(ValidityViolation {
                    step: k,
                    message: e.to_string(),
                });
                return;
            }
        }
        outcome.records.push(TraceRecord {
            k,
            y: state.total(),
            n_k: state.account_count(),
            tx_count: block.txs.len(),
            values: checks.values(&state),
            agreement: None,
        });
    }
}

fn run_network(
    scenario: &Scenario,
    genesis: LedgerState,
    checks: &Checks,
    outcome: &mut RunOutcome,
) -> Result<(), RunError> {
    let t = &scenario.topology;
    let mut gossip_rng = substream(scenario.seed, "gossip");
    let mut mining_rng = substream(scenario.seed, "mining");
    let rules = Rules {
        schedule: scenario.schedule.schedule(),
        ..Rules::default()
    };
    let mut net = NetworkTopology::generate(t.nodes, t.graph, genesis, rules, &mut gossip_rng)?;
    net.set_random_latency(t.latency.min, t.latency.max, &mut gossip_rng);
    net.set_finality_depth(t.finality_depth);
    let policy = MiningPolicy {
        probability: scenario.mining.probability,
        work: scenario.mining.work,
        sends_per_block: scenario.mining.sends_per_block,
        miners: None,
    };

    let mut active: Option<usize> = None;
    for round in 1..=scenario.horizon {
        let now = t
            .partitions
            .iter()
            .position(|p| p.start <= round && round < p.end);
        if now != active {
            match now.map(|i| t.partitions[i].split) {
                None => net.heal(),
                Some(Split::Halves) => {
                    net.partition_halves();
                }
                Some(Split::Random) => {
                    let side: BTreeSet<NodeId> = (0..t.nodes)
                        .filter(|_| gossip_rng.random_bool(0.5))
                        .map(NodeId)
                        .collect();
                    net.partition(&[side]);
                }
            }
            active = now;
        }
        if scenario.mining.inject_invalid.contains(&round) {
            net.inject_invalid_block(NodeId(gossip_rng.random_range(0..t.nodes)));
        }
        net.step_round(&policy, &mut mining_rng);

        let best = net.best_chain();
        let state = best.state();
        outcome.records.push(TraceRecord {
            k: round,
            y: state.total(),
            n_k: state.account_count(),
            tx_count: best.head().txs.txs.len(),
            values: checks.values(state),
            agreement: Some(net.convergence_report().agreement),
        });
    }

    for node in net.nodes() {
        if let Err(e) = replay_chain(&node.chain, net.rules()) {
            outcome.violations.push(ValidityViolation {
                step: scenario.horizon,
                message: format!("{} holds an invalid chain: {e}", node.id),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardSchedule;

    fn scenario(text: &str) -> Scenario {
        Scenario::from_toml(text, &Library::builtin()).unwrap()
    }

    #[test]
    fn substreams_differ_by_name() {
        let a = substream(1, "workload").next_u64();
        let b = substream(1, "mining").next_u64();
        assert_ne!(a, b);
        assert_eq!(a, substream(1, "workload").next_u64());
    }

    #[test]
    fn single_node_bitcoin_supply() {
        let s = scenario("seed = 3\nhorizon = 100\n[agents]\ncount = 1\n");
        let out = run(&s, &Library::builtin()).unwrap();
        assert!(out.success());
        assert_eq!(out.records.len(), 100);
        let schedule = RewardSchedule::bitcoin();
        for r in &out.records {
            assert_eq!(r.y as u128, schedule.cumulative(r.k));
        }
    }

    #[test]
    fn adding_a_check_keeps_the_workload() {
        let base = "seed = 9\nhorizon = 20\n[agents]\ncount = 4\nsends_per_block = 3\n";
        let a = run(&scenario(base), &Library::builtin()).unwrap();
        let b = run(
            &scenario(&format!("{base}[[checks]]\nname = \"positivity\"\n")),
            &Library::builtin(),
        )
        .unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.y, x.n_k, x.tx_count), (y.y, y.n_k, y.tx_count));
        }
    }

    #[test]
    fn sabotage_fails_the_run() {
        let s = scenario(
            "horizon = 3\n[[checks]]\nname = \"positivity\"\ncontract = \"transfer-unguarded\"\n",
        );
        let out = run(&s, &Library::builtin()).unwrap();
        assert!(!out.success());
        assert!(out.checks[0].witness().is_some());
    }

    #[test]
    fn network_run_converges_without_partitions() {
        let s = scenario(
            "mode = \"network\"\nhorizon = 30\n[topology]\nnodes = 6\n[mining]\nprobability = 0.1\n",
        );
        let out = run(&s, &Library::builtin()).unwrap();
        assert!(out.success());
        assert_eq!(out.records.len(), 30);
        assert!(out.records.iter().all(|r| r.agreement.is_some()));
    }
}
