//! Contracts: accounts that contribute a per-account state variable `z_a`
//! and publish methods `f_l : (U_l, X) → X` for mutating it.
//!
//! Methods never touch a [`LedgerState`] directly. They run against a
//! [`Sandbox`], which buffers writes, lets the method read anything, and
//! only lets it write balances and its own contract's variables.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, Balance, LedgerState, StateDelta, VarWrite};

/// Identifier of a contract (the account `α` that declares it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContractId(pub u32);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "contract#{}", self.0)
    }
}

/// One element of a method's action space `U_l(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    /// Move `amount` base units from `from` to `to`.
    Send {
        from: AccountId,
        to: AccountId,
        amount: u64,
    },
    /// An action parameterised only by the account it targets.
    Touch { account: AccountId },
    /// An action targeting an account with a real-valued argument.
    Set { account: AccountId, value: f64 },
    Nop,
}

impl Action {
    /// The account that initiates this action, if it names one.
    pub fn initiator(&self) -> Option<AccountId> {
        match *self {
            Action::Send { from, .. } => Some(from),
            Action::Touch { account } | Action::Set { account, .. } => Some(account),
            Action::Nop => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Send { from, to, amount } => write!(f, "send({from} -> {to}, {amount})"),
            Action::Touch { account } => write!(f, "touch({account})"),
            Action::Set { account, value } => write!(f, "set({account}, {value})"),
            Action::Nop => f.write_str("nop"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SandboxError {
    #[error("{writer} attempted to write variable of {owner} on {account}")]
    ForeignWrite {
        writer: ContractId,
        owner: ContractId,
        account: AccountId,
    },
    #[error("balance arithmetic overflowed on {0}")]
    Overflow(AccountId),
    #[error("method rejected action: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, Default)]
struct Overlay {
    balance: Option<Balance>,
    vars: BTreeMap<ContractId, f64>,
}

/// Write-buffered view of a ledger state handed to a running method.
pub struct Sandbox<'a> {
    base: &'a LedgerState,
    contract: &'a ContractSpec,
    touched: Vec<AccountId>,
    overlay: BTreeMap<AccountId, Overlay>,
}

impl<'a> Sandbox<'a> {
    pub fn new(base: &'a LedgerState, contract: &'a ContractSpec) -> Self {
        Self {
            base,
            contract,
            touched: Vec::new(),
            overlay: BTreeMap::new(),
        }
    }

    pub fn contract_id(&self) -> ContractId {
        self.contract.id
    }

    pub fn height(&self) -> u64 {
        self.base.height()
    }

    /// Accounts visible to the method, in ledger order, followed by any the
    /// method created.
    pub fn accounts(&self) -> Vec<AccountId> {
        let mut ids: Vec<AccountId> = self.base.account_ids().collect();
        ids.extend(self.touched.iter().filter(|a| !self.base.contains(**a)));
        ids
    }

    pub fn exists(&self, account: AccountId) -> bool {
        self.base.contains(account) || self.overlay.contains_key(&account)
    }

    /// Current balance; zero for accounts that do not exist yet.
    pub fn balance(&self, account: AccountId) -> Balance {
        self.overlay
            .get(&account)
            .and_then(|o| o.balance)
            .or_else(|| self.base.balance(account))
            .unwrap_or(0)
    }

    /// Reads this contract's variable on `account`.
    pub fn var(&self, account: AccountId) -> f64 {
        self.foreign_var(self.contract.id, account)
    }

    /// Reads any contract's variable. Unset variables read as this
    /// contract's initial value when `contract` is ours, and as zero
    /// otherwise.
    pub fn foreign_var(&self, contract: ContractId, account: AccountId) -> f64 {
        if let Some(v) = self.overlay.get(&account).and_then(|o| o.vars.get(&contract)) {
            return *v;
        }
        match self.base.var(contract, account) {
            Some(v) => v,
            None if contract == self.contract.id => self.contract.var_init,
            None => 0.0,
        }
    }

    fn slot(&mut self, account: AccountId) -> &mut Overlay {
        if !self.touched.contains(&account) {
            self.touched.push(account);
        }
        self.overlay.entry(account).or_default()
    }

    pub fn set_balance(&mut self, account: AccountId, value: Balance) {
        self.slot(account).balance = Some(value);
    }

    pub fn credit(&mut self, account: AccountId, amount: Balance) -> Result<(), SandboxError> {
        let next = self
            .balance(account)
            .checked_add(amount)
            .ok_or(SandboxError::Overflow(account))?;
        self.set_balance(account, next);
        Ok(())
    }

    /// Debits without a solvency check; guarding the spend is the method's job.
    pub fn debit(&mut self, account: AccountId, amount: Balance) -> Result<(), SandboxError> {
        let next = self
            .balance(account)
            .checked_sub(amount)
            .ok_or(SandboxError::Overflow(account))?;
        self.set_balance(account, next);
        Ok(())
    }

    pub fn transfer(&mut self, from: AccountId, to: AccountId, amount: u64) -> Result<(), SandboxError> {
        let amount = Balance::try_from(amount).map_err(|_| SandboxError::Overflow(from))?;
        self.debit(from, amount)?;
        self.credit(to, amount)
    }

    pub fn set_var(&mut self, account: AccountId, value: f64) {
        let id = self.contract.id;
        self.slot(account).vars.insert(id, value);
    }

    /// Writes another contract's variable; always refused.
    pub fn set_foreign_var(
        &mut self,
        owner: ContractId,
        account: AccountId,
        value: f64,
    ) -> Result<(), SandboxError> {
        if owner == self.contract.id {
            self.set_var(account, value);
            return Ok(());
        }
        Err(SandboxError::ForeignWrite {
            writer: self.contract.id,
            owner,
            account,
        })
    }

    /// Buffered writes as per-account deltas, in first-touch order.
    pub fn deltas(&self) -> Vec<StateDelta> {
        self.touched
            .iter()
            .map(|account| {
                let o = &self.overlay[account];
                let before = self.base.balance(*account).unwrap_or(0);
                let after = o.balance.unwrap_or(before);
                StateDelta {
                    account: *account,
                    delta: after - before,
                    var_writes: o
                        .vars
                        .iter()
                        .map(|(c, v)| VarWrite {
                            contract: *c,
                            value: *v,
                        })
                        .collect(),
                }
            })
            .collect()
    }

    /// Consumes the sandbox, producing the successor state (same height).
    pub fn commit(self) -> LedgerState {
        let mut next = self.base.clone();
        for delta in self.deltas() {
            next.apply_delta_unchecked(&delta);
        }
        next
    }
}

/// A state-transition method `f_l` with its legal action set `U_l(x)`.
pub trait Method: Send + Sync {
    fn name(&self) -> &str;

    /// Every legal action in `state`, when the action space is finite and
    /// small enough to list.
    fn actions(&self, _state: &LedgerState) -> Option<Vec<Action>> {
        None
    }

    /// Draws a legal action uniformly-ish; `None` when no action is legal.
    fn sample(&self, state: &LedgerState, rng: &mut dyn RngCore) -> Option<Action>;

    /// Whether `action ∈ U_l(state)`.
    fn admits(&self, state: &LedgerState, action: &Action) -> bool;

    /// Performs the transition on the sandbox.
    fn apply(&self, action: &Action, sandbox: &mut Sandbox<'_>) -> Result<(), SandboxError>;
}

/// A contract: its identity, the initial value of `z_a` and its methods `F_α`.
#[derive(Clone)]
pub struct ContractSpec {
    pub id: ContractId,
    pub name: String,
    pub var_init: f64,
    pub methods: Vec<Arc<dyn Method>>,
}

impl fmt::Debug for ContractSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContractSpec")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("var_init", &self.var_init)
            .field(
                "methods",
                &self.methods.iter().map(|m| m.name().to_owned()).collect::<Vec<_>>(),
            )
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error("{contract} has no method #{method}")]
    NoSuchMethod { contract: ContractId, method: usize },
    #[error("action {action} is not in the action space of {method}")]
    Inadmissible { method: String, action: Action },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

impl ContractSpec {
    pub fn new(id: ContractId, name: impl Into<String>, var_init: f64) -> Self {
        Self {
            id,
            name: name.into(),
            var_init,
            methods: Vec::new(),
        }
    }

    pub fn with_method(mut self, method: impl Method + 'static) -> Self {
        self.methods.push(Arc::new(method));
        self
    }

    pub fn method(&self, index: usize) -> Option<&Arc<dyn Method>> {
        self.methods.get(index)
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m.name() == name)
    }

    /// Runs `f_l(u, x)` and returns the buffered deltas without committing.
    pub fn deltas(
        &self,
        method: usize,
        action: &Action,
        state: &LedgerState,
    ) -> Result<Vec<StateDelta>, TransitionError> {
        let m = self.method(method).ok_or(TransitionError::NoSuchMethod {
            contract: self.id,
            method,
        })?;
        if !m.admits(state, action) {
            return Err(TransitionError::Inadmissible {
                method: m.name().to_owned(),
                action: action.clone(),
            });
        }
        let mut sandbox = Sandbox::new(state, self);
        m.apply(action, &mut sandbox)?;
        Ok(sandbox.deltas())
    }

    /// `f_l(u, x)`: the successor state. Balances are not checked for sign;
    /// value functions are what judge the result.
    pub fn transition(
        &self,
        method: usize,
        action: &Action,
        state: &LedgerState,
    ) -> Result<LedgerState, TransitionError> {
        let m = self.method(method).ok_or(TransitionError::NoSuchMethod {
            contract: self.id,
            method,
        })?;
        if !m.admits(state, action) {
            return Err(TransitionError::Inadmissible {
                method: m.name().to_owned(),
                action: action.clone(),
            });
        }
        let mut sandbox = Sandbox::new(state, self);
        m.apply(action, &mut sandbox)?;
        Ok(sandbox.commit())
    }
}

/// The set of contracts deployed on a ledger.
#[derive(Debug, Clone, Default)]
pub struct ContractRegistry {
    contracts: BTreeMap<ContractId, ContractSpec>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, contract: ContractSpec) -> Option<ContractSpec> {
        self.contracts.insert(contract.id, contract)
    }

    pub fn get(&self, id: ContractId) -> Option<&ContractSpec> {
        self.contracts.get(&id)
    }

    pub fn contains(&self, id: ContractId) -> bool {
        self.contracts.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ContractSpec> {
        self.contracts.values()
    }
}
