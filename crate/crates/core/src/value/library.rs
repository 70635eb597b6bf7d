//! Built-in contracts and value functions, and a name-keyed registry that
//! scenarios resolve against. Users add their own with
//! [`Library::register_check`] and [`Library::register_contract`].

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Target, ValueFunctionSpec, ValueKind};
use crate::contract::{Action, ContractId, ContractSpec, Method, Sandbox, SandboxError};
use crate::ledger::{AccountId, LedgerState};
use crate::reward::RewardSchedule;

pub const TRANSFER: ContractId = ContractId(1);
pub const TRANSFER_UNGUARDED: ContractId = ContractId(2);
pub const DEVIATION: ContractId = ContractId(3);
pub const FEES: ContractId = ContractId(4);
pub const IDENTITY: ContractId = ContractId(5);
pub const ROGUE: ContractId = ContractId(6);

/// Enumerations beyond this many actions are left to sampling.
const MAX_LISTED_ACTIONS: usize = 10_000;

/// Moves balance between existing accounts. With `guarded`, amounts are
/// capped at the sender's balance; without it, one unit of overdraft is
/// legal, which is exactly the bug a positivity check should catch.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub name: &'static str,
    pub guarded: bool,
    /// Bumps the sender's contract variable by this much per call.
    pub fee: f64,
}

impl Transfer {
    fn cap(&self, balance: i64) -> i64 {
        if self.guarded {
            balance
        } else {
            balance.max(0) + 1
        }
    }
}

impl Method for Transfer {
    fn name(&self) -> &str {
        self.name
    }

    fn actions(&self, state: &LedgerState) -> Option<Vec<Action>> {
        let ids: Vec<AccountId> = state.account_ids().collect();
        let mut out = Vec::new();
        for &from in &ids {
            let cap = self.cap(state.balance(from).unwrap_or(0));
            for &to in ids.iter().filter(|t| **t != from) {
                for amount in 1..=cap.max(0) as u64 {
                    out.push(Action::Send { from, to, amount });
                    if out.len() > MAX_LISTED_ACTIONS {
                        return None;
                    }
                }
            }
        }
        Some(out)
    }

    fn sample(&self, state: &LedgerState, rng: &mut dyn RngCore) -> Option<Action> {
        let ids: Vec<AccountId> = state.account_ids().collect();
        if ids.len() < 2 {
            return None;
        }
        let funded: Vec<AccountId> = ids
            .iter()
            .copied()
            .filter(|a| self.cap(state.balance(*a).unwrap_or(0)) > 0)
            .collect();
        let from = *funded.choose(rng)?;
        let to = loop {
            let t = *ids.choose(rng)?;
            if t != from {
                break t;
            }
        };
        let amount = rng.random_range(1..=self.cap(state.balance(from).unwrap_or(0)) as u64);
        Some(Action::Send { from, to, amount })
    }

    fn admits(&self, state: &LedgerState, action: &Action) -> bool {
        match *action {
            Action::Send { from, to, amount } => {
                from != to
                    && state.contains(from)
                    && state.contains(to)
                    && amount >= 1
                    && i64::try_from(amount)
                        .is_ok_and(|a| a <= self.cap(state.balance(from).unwrap_or(0)))
            }
            _ => false,
        }
    }

    fn apply(&self, action: &Action, sandbox: &mut Sandbox<'_>) -> Result<(), SandboxError> {
        let Action::Send { from, to, amount } = *action else {
            return Err(SandboxError::Rejected(format!("{} takes a send", self.name)));
        };
        sandbox.transfer(from, to, amount)?;
        if self.fee != 0.0 {
            let z = sandbox.var(from);
            sandbox.set_var(from, z + self.fee);
        }
        Ok(())
    }
}

/// Methods whose action is just "pick an account".
fn touch_actions(state: &LedgerState) -> Vec<Action> {
    state.account_ids().map(|account| Action::Touch { account }).collect()
}

fn touch_sample(state: &LedgerState, rng: &mut dyn RngCore) -> Option<Action> {
    let ids: Vec<AccountId> = state.account_ids().collect();
    ids.choose(rng).map(|&account| Action::Touch { account })
}

fn touch_admits(state: &LedgerState, action: &Action) -> bool {
    matches!(action, Action::Touch { account } if state.contains(*account))
}

/// Moves the touched account's variable so that `Σ z` closes `factor` of
/// its gap to the target: `z_a += factor · (y*(k) − Σ z)`.
pub struct Nudge {
    pub name: &'static str,
    pub factor: f64,
    pub target: Target,
}

impl Method for Nudge {
    fn name(&self) -> &str {
        self.name
    }

    fn actions(&self, state: &LedgerState) -> Option<Vec<Action>> {
        Some(touch_actions(state))
    }

    fn sample(&self, state: &LedgerState, rng: &mut dyn RngCore) -> Option<Action> {
        touch_sample(state, rng)
    }

    fn admits(&self, state: &LedgerState, action: &Action) -> bool {
        touch_admits(state, action)
    }

    fn apply(&self, action: &Action, sandbox: &mut Sandbox<'_>) -> Result<(), SandboxError> {
        let Action::Touch { account } = *action else {
            return Err(SandboxError::Rejected(format!("{} takes a touch", self.name)));
        };
        let sum: f64 = sandbox.accounts().into_iter().map(|a| sandbox.var(a)).sum();
        let gap = (self.target)(sandbox.height()) - sum;
        let z = sandbox.var(account);
        sandbox.set_var(account, z + self.factor * gap);
        Ok(())
    }
}

/// Adds a fixed amount to the touched account's variable.
#[derive(Debug, Clone)]
pub struct Tip {
    pub amount: f64,
}

impl Method for Tip {
    fn name(&self) -> &str {
        "tip"
    }

    fn actions(&self, state: &LedgerState) -> Option<Vec<Action>> {
        Some(touch_actions(state))
    }

    fn sample(&self, state: &LedgerState, rng: &mut dyn RngCore) -> Option<Action> {
        touch_sample(state, rng)
    }

    fn admits(&self, state: &LedgerState, action: &Action) -> bool {
        touch_admits(state, action)
    }

    fn apply(&self, action: &Action, sandbox: &mut Sandbox<'_>) -> Result<(), SandboxError> {
        let Action::Touch { account } = *action else {
            return Err(SandboxError::Rejected("tip takes a touch".into()));
        };
        let z = sandbox.var(account);
        sandbox.set_var(account, z + self.amount);
        Ok(())
    }
}

/// Does nothing.
#[derive(Debug, Clone, Copy)]
pub struct Noop;

impl Method for Noop {
    fn name(&self) -> &str {
        "noop"
    }

    fn actions(&self, _state: &LedgerState) -> Option<Vec<Action>> {
        Some(vec![Action::Nop])
    }

    fn sample(&self, _state: &LedgerState, _rng: &mut dyn RngCore) -> Option<Action> {
        Some(Action::Nop)
    }

    fn admits(&self, _state: &LedgerState, action: &Action) -> bool {
        *action == Action::Nop
    }

    fn apply(&self, _action: &Action, _sandbox: &mut Sandbox<'_>) -> Result<(), SandboxError> {
        Ok(())
    }
}

/// Tries to overwrite another contract's variable.
#[derive(Debug, Clone, Copy)]
pub struct Meddle {
    pub victim: ContractId,
}

impl Method for Meddle {
    fn name(&self) -> &str {
        "meddle"
    }

    fn actions(&self, state: &LedgerState) -> Option<Vec<Action>> {
        Some(touch_actions(state))
    }

    fn sample(&self, state: &LedgerState, rng: &mut dyn RngCore) -> Option<Action> {
        touch_sample(state, rng)
    }

    fn admits(&self, state: &LedgerState, action: &Action) -> bool {
        touch_admits(state, action)
    }

    fn apply(&self, action: &Action, sandbox: &mut Sandbox<'_>) -> Result<(), SandboxError> {
        let Action::Touch { account } = *action else {
            return Err(SandboxError::Rejected("meddle takes a touch".into()));
        };
        sandbox.set_foreign_var(self.victim, account, 1.0)
    }
}

pub fn transfer() -> ContractSpec {
    ContractSpec::new(TRANSFER, "transfer", 0.0).with_method(Transfer {
        name: "send",
        guarded: true,
        fee: 0.0,
    })
}

/// The transfer contract with its balance guard removed.
pub fn transfer_unguarded() -> ContractSpec {
    ContractSpec::new(TRANSFER_UNGUARDED, "transfer-unguarded", 0.0).with_method(Transfer {
        name: "send-unguarded",
        guarded: false,
        fee: 0.0,
    })
}

fn target_fn(target: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Target {
    Arc::new(target)
}

/// Every call halves the gap between `Σ z` and the target.
pub fn deviation_halving(target: impl Fn(u64) -> f64 + Send + Sync + 'static) -> ContractSpec {
    ContractSpec::new(DEVIATION, "deviation-halving", 0.0).with_method(Nudge {
        name: "nudge",
        factor: 0.5,
        target: target_fn(target),
    })
}

/// [`deviation_halving`] plus a method that doubles the gap.
pub fn deviation_halving_with_bad_method(
    target: impl Fn(u64) -> f64 + Send + Sync + 'static,
) -> ContractSpec {
    let target = target_fn(target);
    ContractSpec::new(DEVIATION, "deviation-halving-bad", 0.0)
        .with_method(Nudge {
            name: "nudge",
            factor: 0.5,
            target: Arc::clone(&target),
        })
        .with_method(Nudge {
            name: "push-away",
            factor: -1.0,
            target,
        })
}

/// Every method adds a non-negative amount to some account's variable.
pub fn fee_accumulator() -> ContractSpec {
    ContractSpec::new(FEES, "fee-accumulator", 0.0)
        .with_method(Transfer {
            name: "pay",
            guarded: true,
            fee: 1.0,
        })
        .with_method(Tip { amount: 1.0 })
}

pub fn identity() -> ContractSpec {
    ContractSpec::new(IDENTITY, "identity", 0.0).with_method(Noop)
}

/// A contract whose only method writes the transfer contract's variables.
pub fn rogue() -> ContractSpec {
    ContractSpec::new(ROGUE, "rogue", 0.0).with_method(Meddle { victim: TRANSFER })
}

/// `V(x) = Σ x_i`.
pub fn supply_invariant() -> ValueFunctionSpec {
    ValueFunctionSpec::new("supply-invariant", ValueKind::Invariant(None), |x: &LedgerState| {
        x.total() as f64
    })
    .exact()
}

/// `V(x) = −Σ min{0, x_i}`: zero exactly when no balance is negative.
pub fn positivity() -> ValueFunctionSpec {
    ValueFunctionSpec::new("positivity", ValueKind::Invariant(Some(0.0)), |x: &LedgerState| {
        (-x.accounts().map(|(_, a)| a.balance.min(0)).sum::<i64>()) as f64
    })
    .exact()
}

fn var_sum(x: &LedgerState, contract: ContractId) -> f64 {
    x.account_ids().map(|a| x.var(contract, a).unwrap_or(0.0)).sum()
}

/// `V(x) = |Σ z_a − y*(k)|` over the deviation contract's variables.
pub fn deviation(
    gamma: f64,
    target: impl Fn(u64) -> f64 + Send + Sync + 'static,
) -> ValueFunctionSpec {
    let mut v = ValueFunctionSpec::controller("deviation", gamma, |x: &LedgerState| var_sum(x, DEVIATION), target);
    v.kind = ValueKind::Contractive { gamma };
    v
}

/// The controller form of [`deviation`].
pub fn deviation_controller(
    gamma: f64,
    target: impl Fn(u64) -> f64 + Send + Sync + 'static,
) -> ValueFunctionSpec {
    ValueFunctionSpec::controller("deviation", gamma, |x: &LedgerState| var_sum(x, DEVIATION), target)
}

/// `V(x) = Σ z_a` over the fee contract's variables.
pub fn fee_growth(epsilon: f64) -> ValueFunctionSpec {
    ValueFunctionSpec::new("fee-growth", ValueKind::Monotone { epsilon }, |x: &LedgerState| {
        var_sum(x, FEES)
    })
}

/// `V(x) = |Σ x_i − Σ_{j ≤ k} μ_j|`: realized supply against the schedule.
pub fn supply_tracking(schedule: RewardSchedule, gamma: f64) -> ValueFunctionSpec {
    ValueFunctionSpec::controller(
        "supply-tracking",
        gamma,
        |x: &LedgerState| x.total() as f64,
        move |k| schedule.cumulative(k) as f64,
    )
    .exact()
}

/// Parameters a scenario may attach to a named check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckParams {
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    /// Constant target for deviation checks.
    pub target: Option<f64>,
    /// Schedule for supply tracking; Bitcoin's when absent.
    pub schedule: Option<RewardSchedule>,
}

impl CheckParams {
    fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.5)
    }

    fn target(&self) -> f64 {
        self.target.unwrap_or(0.0)
    }
}

pub type CheckFactory = Arc<dyn Fn(&CheckParams) -> ValueFunctionSpec + Send + Sync>;
pub type ContractFactory = Arc<dyn Fn(&CheckParams) -> ContractSpec + Send + Sync>;

/// Named value functions and contracts. Each check also names the contract
/// it is checked against by default.
#[derive(Clone)]
pub struct Library {
    checks: BTreeMap<String, (CheckFactory, String)>,
    contracts: BTreeMap<String, ContractFactory>,
}

impl std::fmt::Debug for Library {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Library")
            .field("checks", &self.checks.keys().collect::<Vec<_>>())
            .field("contracts", &self.contracts.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for Library {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Library {
    pub fn empty() -> Self {
        Self {
            checks: BTreeMap::new(),
            contracts: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut lib = Self::empty();
        lib.register_contract("transfer", |_| transfer());
        lib.register_contract("transfer-unguarded", |_| transfer_unguarded());
        lib.register_contract("deviation-halving", |p| {
            let t = p.target();
            deviation_halving(move |_| t)
        });
        lib.register_contract("deviation-halving-bad", |p| {
            let t = p.target();
            deviation_halving_with_bad_method(move |_| t)
        });
        lib.register_contract("fee-accumulator", |_| fee_accumulator());
        lib.register_contract("identity", |_| identity());
        lib.register_contract("rogue", |_| rogue());

        lib.register_check("supply-invariant", "transfer", |_| supply_invariant());
        lib.register_check("positivity", "transfer", |_| positivity());
        lib.register_check("deviation", "deviation-halving", |p| {
            let t = p.target();
            deviation(p.gamma(), move |_| t)
        });
        lib.register_check("fee-growth", "fee-accumulator", |p| {
            fee_growth(p.epsilon.unwrap_or(0.0))
        });
        lib.register_check("supply-tracking", "transfer", |p| {
            supply_tracking(
                p.schedule.clone().unwrap_or_else(RewardSchedule::bitcoin),
                p.gamma(),
            )
        });
        lib
    }

    pub fn register_check(
        &mut self,
        name: impl Into<String>,
        default_contract: impl Into<String>,
        factory: impl Fn(&CheckParams) -> ValueFunctionSpec + Send + Sync + 'static,
    ) {
        self.checks
            .insert(name.into(), (Arc::new(factory), default_contract.into()));
    }

    pub fn register_contract(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&CheckParams) -> ContractSpec + Send + Sync + 'static,
    ) {
        self.contracts.insert(name.into(), Arc::new(factory));
    }

    pub fn check(&self, name: &str, params: &CheckParams) -> Option<ValueFunctionSpec> {
        self.checks.get(name).map(|(f, _)| f(params))
    }

    pub fn default_contract(&self, check: &str) -> Option<&str> {
        self.checks.get(check).map(|(_, c)| c.as_str())
    }

    pub fn contract(&self, name: &str, params: &CheckParams) -> Option<ContractSpec> {
        self.contracts.get(name).map(|f| f(params))
    }

    pub fn has_check(&self, name: &str) -> bool {
        self.checks.contains_key(name)
    }

    pub fn has_contract(&self, name: &str) -> bool {
        self.contracts.contains_key(name)
    }

    pub fn check_names(&self) -> impl Iterator<Item = &str> {
        self.checks.keys().map(String::as_str)
    }

    pub fn contract_names(&self) -> impl Iterator<Item = &str> {
        self.contracts.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{
        check_contractive, check_invariant, check_monotone, run_controller, ControllerRun,
        Coverage, Driver, RandomPolicy, Sampler, Verdict, Violation,
    };
    use crate::value::CheckError;

    const BUDGET: u64 = 1_000_000;

    fn small() -> Sampler {
        Sampler::default()
    }

    fn vars(lo: i64, hi: i64) -> Sampler {
        Sampler {
            var_range: Some((lo, hi)),
            max_balance: 1,
            ..Sampler::default()
        }
    }

    #[test]
    fn supply_is_invariant_under_sends() {
        let r = check_invariant(&supply_invariant(), &transfer(), &small(), BUDGET).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.coverage, Coverage::Exhaustive);
        assert!(r.trials > 0);
    }

    #[test]
    fn positivity_holds_with_guard() {
        let r = check_invariant(&positivity(), &transfer(), &small(), BUDGET).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn positivity_fails_without_guard_and_replays() {
        let contract = transfer_unguarded();
        let v = positivity();
        let r = check_invariant(&v, &contract, &small(), BUDGET).unwrap();
        let w = r.witness().expect("counterexample");
        assert_eq!(w.v_before, 0.0);
        assert_eq!(w.v_after, 1.0);
        // Shrinking leaves one unit of overdraft from an empty account.
        assert_eq!(
            w.action,
            Action::Send {
                from: AccountId(0),
                to: AccountId(1),
                amount: 1
            }
        );
        assert_eq!(w.state.balance(AccountId(0)), Some(0));
        assert_eq!(w.replay(&v, &contract).unwrap(), (w.v_before, w.v_after));
    }

    #[test]
    fn sampled_mode_when_domain_is_large() {
        let sampler = Sampler {
            accounts: 6,
            max_balance: 1_000,
            seed: 3,
            ..Sampler::default()
        };
        let v = positivity();
        let r = check_invariant(&v, &transfer_unguarded(), &sampler, 10_000).unwrap();
        assert_eq!(r.coverage, Coverage::Sampled);
        let w = r.witness().unwrap();
        assert_eq!(w.replay(&v, &transfer_unguarded()).unwrap(), (w.v_before, w.v_after));
        let again = check_invariant(&v, &transfer_unguarded(), &sampler, 10_000).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn wrong_kind_is_an_error() {
        assert_eq!(
            check_monotone(&positivity(), &transfer(), &small(), 10),
            Err(CheckError::NotMonotoneKind("positivity".into()))
        );
        assert!(matches!(
            check_contractive(&positivity(), &transfer(), &small(), 10),
            Err(CheckError::NotContractiveKind(_))
        ));
        assert!(matches!(
            check_invariant(&fee_growth(0.0), &transfer(), &small(), 10),
            Err(CheckError::NotInvariantKind(_))
        ));
    }

    #[test]
    fn fee_accumulator_is_monotone() {
        let r = check_monotone(&fee_growth(0.0), &fee_accumulator(), &vars(0, 3), BUDGET).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn identity_is_monotone_only_without_epsilon() {
        let sampler = vars(0, 2);
        let v = fee_growth(0.0);
        assert!(check_monotone(&v, &identity(), &sampler, BUDGET).unwrap().passed());
        // The identity contract writes nothing, so read V off the fee variables.
        let strict = fee_growth(0.01);
        let mut contract = identity();
        contract.id = FEES;
        let r = check_monotone(&strict, &contract, &sampler, BUDGET).unwrap();
        let w = r.witness().unwrap();
        assert!(w.v_before > 0.0);
        assert_eq!(w.violation, Violation::NotIncreased);
    }

    #[test]
    fn halving_contracts_and_bad_method_is_named() {
        let sampler = Sampler {
            trajectories: 50,
            ..vars(-8, 8)
        };
        let v = deviation(0.5, |_| 3.0);
        let r = check_contractive(&v, &deviation_halving(|_| 3.0), &sampler, BUDGET).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.trajectories, 50);

        let bad = deviation_halving_with_bad_method(|_| 3.0);
        let r = check_contractive(&v, &bad, &sampler, BUDGET).unwrap();
        assert_eq!(r.witness().unwrap().method, "push-away");
    }

    #[test]
    fn zero_deviation_trivially_contracts() {
        let sampler = Sampler {
            var_range: Some((0, 0)),
            ..Sampler::default()
        };
        let v = deviation(0.5, |_| 0.0);
        assert!(check_contractive(&v, &deviation_halving(|_| 0.0), &sampler, BUDGET)
            .unwrap()
            .passed());
    }

    #[test]
    fn sandbox_rejects_cross_writes() {
        let r = check_invariant(&supply_invariant(), &rogue(), &small(), BUDGET).unwrap();
        match r.verdict {
            Verdict::SandboxViolation { method, .. } => assert_eq!(method, "meddle"),
            other => panic!("expected sandbox violation, got {other:?}"),
        }
    }

    #[test]
    fn invariant_supply_is_monotone_but_not_contractive() {
        let v = supply_invariant();
        let mono = v.with_kind(ValueKind::Monotone { epsilon: 0.0 });
        assert!(check_monotone(&mono, &transfer(), &small(), BUDGET).unwrap().passed());
        let con = v.with_kind(ValueKind::Contractive { gamma: 0.9 });
        let r = check_contractive(&con, &transfer(), &small(), BUDGET).unwrap();
        assert!(r.witness().unwrap().v_before > 0.0);
    }

    fn controller_run(x0: LedgerState, driver: Driver) -> ControllerRun {
        ControllerRun {
            x0,
            horizon: 12,
            seed: 5,
            driver,
            sampler: vars(-8, 8),
            budget: BUDGET,
            neighborhood: 0.0,
        }
    }

    #[test]
    fn constant_target_decays_geometrically() {
        let mut x0 = LedgerState::from_balances([(AccountId(0), 0), (AccountId(1), 0)]);
        x0.set_var(DEVIATION, AccountId(0), 8.0);
        let trace = run_controller(
            &deviation_controller(0.5, |_| 0.0),
            &deviation_halving(|_| 0.0),
            &mut RandomPolicy,
            &controller_run(x0, Driver::Advance),
        )
        .unwrap();
        let vs: Vec<f64> = trace.records.iter().take(5).map(|r| r.v).collect();
        assert_eq!(vs, vec![8.0, 4.0, 2.0, 1.0, 0.5]);
        assert!(trace.tracking_ok());
    }

    #[test]
    fn ramp_faster_than_contraction_is_flagged() {
        let x0 = LedgerState::from_balances([(AccountId(0), 0), (AccountId(1), 0)]);
        let trace = run_controller(
            &deviation_controller(0.5, |k| k as f64),
            &deviation_halving(|k| k as f64),
            &mut RandomPolicy,
            &controller_run(x0, Driver::Advance),
        )
        .unwrap();
        assert!(!trace.tracking_ok());
        assert_eq!(trace.flagged_steps()[0], 1);
        assert!(trace.records[1].drift_exceeds);
    }

    #[test]
    fn supply_tracking_stays_at_zero() {
        let schedule = RewardSchedule::bitcoin();
        let x0 = LedgerState::from_balances([(AccountId(0), 0), (AccountId(1), 0)]);
        let trace = run_controller(
            &supply_tracking(schedule.clone(), 0.5),
            &transfer(),
            &mut RandomPolicy,
            &controller_run(
                x0,
                Driver::Mint {
                    schedule,
                    recipient: AccountId(0),
                },
            ),
        )
        .unwrap();
        assert!(trace.records.iter().all(|r| r.v == 0.0));
        assert_eq!(trace.records.last().unwrap().g, 12.0 * 5e9);
    }

    #[test]
    fn non_contracting_contract_is_refused() {
        let mut x0 = LedgerState::from_balances([(AccountId(0), 0)]);
        x0.set_var(DEVIATION, AccountId(0), 8.0);
        let err = run_controller(
            &deviation_controller(0.5, |_| 0.0),
            &deviation_halving_with_bad_method(|_| 0.0),
            &mut RandomPolicy,
            &controller_run(x0, Driver::Advance),
        )
        .unwrap_err();
        assert!(matches!(err, CheckError::UncontractiveContract(_)));
    }

    #[test]
    fn library_resolves_names() {
        let lib = Library::builtin();
        for name in ["supply-invariant", "positivity", "deviation", "fee-growth", "supply-tracking"] {
            let params = CheckParams::default();
            let v = lib.check(name, &params).unwrap();
            assert_eq!(v.name, name);
            assert!(lib.contract(lib.default_contract(name).unwrap(), &params).is_some());
        }
        assert!(lib.check("nope", &CheckParams::default()).is_none());
    }
}
