//! The ledger state machine: accounts, transactions, blocks and chains.
//!
//! Balances are exact integers in base units. A [`LedgerState`] keeps its
//! accounts in creation order, which is also the coordinate order of the
//! state vector `x(k)` used by [`crate::lte`].

mod block;
mod chain;
pub mod codec;
mod tx;

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::contract::{ContractId, ContractRegistry};
use crate::reward::RewardSchedule;

pub use block::{apply_block, satisfies_net_flow, Block, BlockError, TransactionBlock};
pub use chain::{block_digest, replay_chain, replay_suffix, Chain, ChainError, InvalidReason};
pub use codec::Digest;
pub use tx::{
    apply_transaction, validate_transaction, ActionRef, StateDelta, Transaction, Transfer, TxError,
    VarWrite,
};

/// Signed balance in base units. Committed states never hold a negative one.
pub type Balance = i64;

/// Opaque account identifier standing in for a public key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccountId(pub u64);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acct#{}", self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    pub balance: Balance,
    /// Variables `z_a` contributed to this account by contracts.
    pub contract_vars: BTreeMap<ContractId, f64>,
}

impl AccountState {
    pub fn with_balance(balance: Balance) -> Self {
        Self {
            balance,
            contract_vars: BTreeMap::new(),
        }
    }
}

/// Economic state at one block height.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LedgerState {
    height: u64,
    #[serde(with = "indexmap::map::serde_seq")]
    accounts: IndexMap<AccountId, AccountState>,
}

impl PartialEq for LedgerState {
    fn eq(&self, other: &Self) -> bool {
        // IndexMap equality ignores order; creation order is part of the state.
        self.height == other.height && self.accounts.iter().eq(other.accounts.iter())
    }
}

impl LedgerState {
    /// The empty genesis state.
    pub fn genesis() -> Self {
        Self::default()
    }

    /// A height-0 state with the given balances, created in iteration order.
    pub fn from_balances<I: IntoIterator<Item = (AccountId, Balance)>>(balances: I) -> Self {
        let mut s = Self::default();
        for (id, b) in balances {
            s.insert_account(id, b);
        }
        s
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn with_height(mut self, height: u64) -> Self {
        self.height = height;
        self
    }

    pub(crate) fn set_height(&mut self, height: u64) {
        self.height = height;
    }

    /// Number of accounts, `n_k`.
    pub fn account_count(&self) -> usize {
        self.accounts.len()
    }

    pub fn contains(&self, id: AccountId) -> bool {
        self.accounts.contains_key(&id)
    }

    pub fn account(&self, id: AccountId) -> Option<&AccountState> {
        self.accounts.get(&id)
    }

    pub fn account_ids(&self) -> impl Iterator<Item = AccountId> + '_ {
        self.accounts.keys().copied()
    }

    pub fn accounts(&self) -> impl Iterator<Item = (AccountId, &AccountState)> + '_ {
        self.accounts.iter().map(|(id, a)| (*id, a))
    }

    pub fn balance(&self, id: AccountId) -> Option<Balance> {
        self.accounts.get(&id).map(|a| a.balance)
    }

    pub fn var(&self, contract: ContractId, account: AccountId) -> Option<f64> {
        self.accounts
            .get(&account)
            .and_then(|a| a.contract_vars.get(&contract).copied())
    }

    /// Position of `id` in creation order.
    pub fn index_of(&self, id: AccountId) -> Option<usize> {
        self.accounts.get_index_of(&id)
    }

    pub fn id_at(&self, index: usize) -> Option<AccountId> {
        self.accounts.get_index(index).map(|(id, _)| *id)
    }

    /// Balances in creation order: the state vector `x(k)`.
    pub fn to_vector(&self) -> Vec<Balance> {
        self.accounts.values().map(|a| a.balance).collect()
    }

    /// `y = 1'x`, the total quantity held.
    pub fn total(&self) -> Balance {
        self.accounts.values().map(|a| a.balance).sum()
    }

    pub fn min_balance(&self) -> Option<Balance> {
        self.accounts.values().map(|a| a.balance).min()
    }

    /// Whether every balance is nonnegative.
    pub fn is_legal(&self) -> bool {
        self.accounts.values().all(|a| a.balance >= 0)
    }

    /// Inserts an account (or overwrites its balance).
    pub fn insert_account(&mut self, id: AccountId, balance: Balance) {
        self.accounts.entry(id).or_default().balance = balance;
    }

    pub fn set_var(&mut self, contract: ContractId, account: AccountId, value: f64) {
        self.accounts
            .entry(account)
            .or_default()
            .contract_vars
            .insert(contract, value);
    }

    fn entry(&mut self, id: AccountId) -> &mut AccountState {
        self.accounts.entry(id).or_default()
    }

    pub(crate) fn apply_delta_unchecked(&mut self, delta: &StateDelta) {
        let acct = self.entry(delta.account);
        acct.balance += delta.delta;
        for w in &delta.var_writes {
            acct.contract_vars.insert(w.contract, w.value);
        }
    }
}

/// Validation context shared by every node of a network: the deployed
/// contracts and, optionally, the reward schedule blocks must follow.
#[derive(Debug, Clone, Default)]
pub struct Rules {
    pub contracts: ContractRegistry,
    pub schedule: Option<RewardSchedule>,
}

impl Rules {
    pub fn with_schedule(schedule: RewardSchedule) -> Self {
        Self {
            contracts: ContractRegistry::default(),
            schedule: Some(schedule),
        }
    }
}
