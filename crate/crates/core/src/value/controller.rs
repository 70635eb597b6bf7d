use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::check::{check_contractive, check_invariant, Sampler};
use super::{CheckError, CheckReport, ValueFunctionSpec, ValueKind};
use crate::contract::{Action, ContractSpec};
use crate::ledger::{apply_block, AccountId, LedgerState, Rules, TransactionBlock};
use crate::reward::{RewardEvent, RewardSchedule};

/// Chooses the contract call made at each controller step.
pub trait ActionPolicy {
    fn choose(
        &mut self,
        contract: &ContractSpec,
        state: &LedgerState,
        rng: &mut dyn RngCore,
    ) -> Option<(usize, Action)>;
}

/// A uniformly chosen method with an action from its own sampler.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl ActionPolicy for RandomPolicy {
    fn choose(
        &mut self,
        contract: &ContractSpec,
        state: &LedgerState,
        rng: &mut dyn RngCore,
    ) -> Option<(usize, Action)> {
        let n = contract.methods.len();
        if n == 0 {
            return None;
        }
        let first = rng.random_range(0..n);
        (0..n)
            .map(|o| (first + o) % n)
            .find_map(|i| contract.methods[i].sample(state, rng).map(|a| (i, a)))
    }
}

/// What moves the ledger from one height to the next, outside the contract.
#[derive(Debug, Clone, PartialEq)]
pub enum Driver {
    /// Height advances; nothing else changes.
    Advance,
    /// Each block mints the scheduled reward to `recipient`.
    Mint {
        schedule: RewardSchedule,
        recipient: AccountId,
    },
}

impl Driver {
    fn advance(&self, state: &LedgerState) -> Result<LedgerState, String> {
        match self {
            Driver::Advance => Ok(state.clone().with_height(state.height() + 1)),
            Driver::Mint { schedule, recipient } => {
                let k = state.height() + 1;
                let mu = schedule.mu(k);
                let reward = if mu > 0 {
                    RewardEvent::to_miner(mu, *recipient)
                } else {
                    RewardEvent::none()
                };
                let block = TransactionBlock::new(k, Vec::new(), reward);
                apply_block(state, &block, &Rules::with_schedule(schedule.clone()))
                    .map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerRun {
    pub x0: LedgerState,
    pub horizon: u64,
    pub seed: u64,
    pub driver: Driver,
    /// Domain for the up-front contraction check.
    pub sampler: Sampler,
    pub budget: u64,
    /// Slack allowed above `γ^k V(x(0))` before a step is flagged.
    pub neighborhood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerRecord {
    pub k: u64,
    /// Output `g(x(k))`.
    pub g: f64,
    /// Target `y*(k)`.
    pub target: f64,
    pub v: f64,
    /// `γ^k V(x(0)) + neighborhood`.
    pub bound: f64,
    /// `v` exceeded `bound`.
    pub flagged: bool,
    /// The target moved by more than `(1 − γ) V(x(k−1))` this step.
    pub drift_exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerTrace {
    /// The check that licensed the run.
    pub precondition: CheckReport,
    pub records: Vec<ControllerRecord>,
}

impl ControllerTrace {
    pub fn flagged_steps(&self) -> Vec<u64> {
        self.records.iter().filter(|r| r.flagged).map(|r| r.k).collect()
    }

    pub fn tracking_ok(&self) -> bool {
        self.records.iter().all(|r| !r.flagged)
    }
}

/// The precondition of [`run_controller`]: the contract contracts `spec`'s
/// value function, or keeps it invariant while `V(x0) = 0`. The returned
/// report is the one that decided; on failure it is the contraction check.
pub fn check_controller(
    spec: &ValueFunctionSpec,
    contract: &ContractSpec,
    sampler: &Sampler,
    budget: u64,
    x0: &LedgerState,
) -> Result<CheckReport, CheckError> {
    if !matches!(spec.kind, ValueKind::Controller { .. }) {
        return Err(CheckError::NotContractiveKind(spec.name.clone()));
    }
    let contraction = check_contractive(spec, contract, sampler, budget)?;
    if contraction.passed() || spec.eval(x0) != 0.0 {
        return Ok(contraction);
    }
    let invariant = check_invariant(
        &spec.with_kind(ValueKind::Invariant(None)),
        contract,
        sampler,
        budget,
    )?;
    Ok(if invariant.passed() { invariant } else { contraction })
}

/// Runs a Lyapunov controller for `run.horizon` steps.
///
/// The contract must first pass a contraction check against `spec`. A
/// contract that keeps `V` invariant also qualifies when `V(x(0)) = 0`,
/// since `V` then stays at zero. Each step applies the driver, then one
/// contract call chosen by `policy`, and records `(k, g, y*, V)`.
pub fn run_controller(
    spec: &ValueFunctionSpec,
    contract: &ContractSpec,
    policy: &mut dyn ActionPolicy,
    run: &ControllerRun,
) -> Result<ControllerTrace, CheckError> {
    let ValueKind::Controller {
        output,
        target,
        gamma,
    } = &spec.kind
    else {
        return Err(CheckError::NotContractiveKind(spec.name.clone()));
    };
    let gamma = *gamma;

    let precondition = check_controller(spec, contract, &run.sampler, run.budget, &run.x0)?;
    if !precondition.passed() {
        return Err(CheckError::UncontractiveContract(Box::new(precondition)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut state = run.x0.clone();
    let v0 = spec.eval(&state);
    let mut decay = 1.0;
    let mut records = vec![ControllerRecord {
        k: 0,
        g: output(&state),
        target: target(state.height()),
        v: v0,
        bound: v0 + run.neighborhood,
        flagged: false,
        drift_exceeds: false,
    }];

    for k in 1..=run.horizon {
        let prev_v = spec.eval(&state);
        let prev_target = target(state.height());
        state = run
            .driver
            .advance(&state)
            .map_err(|reason| CheckError::Step { step: k, reason })?;
        if let Some((i, a)) = policy.choose(contract, &state, &mut rng) {
            state = contract
                .transition(i, &a, &state)
                .map_err(|e| CheckError::Step {
                    step: k,
                    reason: e.to_string(),
                })?;
        }
        decay *= gamma;
        let v = spec.eval(&state);
        let bound = decay * v0 + run.neighborhood;
        let y = target(state.height());
        records.push(ControllerRecord {
            k,
            g: output(&state),
            target: y,
            v,
            bound,
            flagged: !spec.le(v, bound),
            drift_exceeds: (y - prev_target).abs() > (1.0 - gamma) * prev_v,
        });
    }
    Ok(ControllerTrace {
        precondition,
        records,
    })
}
