use thiserror::Error;

use crate::contract::{Action, ContractId, ContractSpec, TransitionError};

use super::{AccountId, Balance, LedgerState, Rules};

/// A contract variable write carried by a delta: the new value of `z_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarWrite {
    pub contract: ContractId,
    pub value: f64,
}

/// The change `Δx_a` one transaction makes to one account.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDelta {
    pub account: AccountId,
    pub delta: Balance,
    pub var_writes: Vec<VarWrite>,
}

impl StateDelta {
    pub fn balance(account: AccountId, delta: Balance) -> Self {
        Self {
            account,
            delta,
            var_writes: Vec::new(),
        }
    }
}

/// A plain send of base units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transfer {
    pub from: AccountId,
    pub to: AccountId,
    pub amount: u64,
}

/// What produced a transaction's deltas.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionRef {
    Transfer(Transfer),
    Call {
        contract: ContractId,
        method: usize,
        action: Action,
    },
}

/// `tx = [Δx_{a_0}, …, Δx_{a_n}]` together with the action that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub initiator: AccountId,
    pub deltas: Vec<StateDelta>,
    pub action: ActionRef,
}

impl Transaction {
    pub fn transfer(from: AccountId, to: AccountId, amount: u64) -> Self {
        let signed = amount as Balance;
        Self {
            initiator: from,
            deltas: vec![
                StateDelta::balance(from, -signed),
                StateDelta::balance(to, signed),
            ],
            action: ActionRef::Transfer(Transfer { from, to, amount }),
        }
    }

    /// Builds a contract call by running the method against `state`.
    pub fn call(
        contract: &ContractSpec,
        method: usize,
        initiator: AccountId,
        action: Action,
        state: &LedgerState,
    ) -> Result<Self, TransitionError> {
        let deltas = contract.deltas(method, &action, state)?;
        Ok(Self {
            initiator,
            deltas,
            action: ActionRef::Call {
                contract: contract.id,
                method,
                action,
            },
        })
    }

    pub fn touches(&self, account: AccountId) -> bool {
        self.deltas.iter().any(|d| d.account == account)
    }

    /// Net balance change this transaction makes to `account`.
    pub fn delta_for(&self, account: AccountId) -> Balance {
        self.deltas
            .iter()
            .filter(|d| d.account == account)
            .map(|d| d.delta)
            .sum()
    }

    pub fn as_transfer(&self) -> Option<&Transfer> {
        match &self.action {
            ActionRef::Transfer(t) => Some(t),
            ActionRef::Call { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TxError {
    #[error("{account} holds {balance} but the transaction needs {amount}")]
    InsufficientBalance {
        account: AccountId,
        balance: Balance,
        amount: Balance,
    },
    #[error("initiator {0} does not exist")]
    UnknownAccount(AccountId),
    #[error("{contract} rejected the call: {reason}")]
    IllegalMethod { contract: ContractId, reason: String },
    #[error("{0} is not deployed")]
    UnknownContract(ContractId),
    #[error("declared deltas do not match the generating action")]
    DeltaMismatch,
    #[error("initiator {0} is not among the transaction's accounts")]
    InitiatorNotInDeltas(AccountId),
    #[error("{0} sends to itself")]
    SelfTransfer(AccountId),
    #[error("amount overflows the balance type")]
    Overflow,
}

/// Checks `tx` against the state produced by every earlier transaction of
/// its block.
pub fn validate_transaction(
    tx: &Transaction,
    working: &LedgerState,
    rules: &Rules,
) -> Result<(), TxError> {
    if !tx.touches(tx.initiator) {
        return Err(TxError::InitiatorNotInDeltas(tx.initiator));
    }
    match &tx.action {
        ActionRef::Transfer(t) => validate_transfer(tx, t, working),
        ActionRef::Call {
            contract,
            method,
            action,
        } => validate_call(tx, *contract, *method, action, working, rules),
    }
}

fn validate_transfer(tx: &Transaction, t: &Transfer, working: &LedgerState) -> Result<(), TxError> {
    let balance = working
        .balance(t.from)
        .ok_or(TxError::UnknownAccount(t.from))?;
    if tx.initiator != t.from {
        return Err(TxError::DeltaMismatch);
    }
    if t.from == t.to {
        return Err(TxError::SelfTransfer(t.from));
    }
    let amount = Balance::try_from(t.amount).map_err(|_| TxError::Overflow)?;
    if amount > balance {
        return Err(TxError::InsufficientBalance {
            account: t.from,
            balance,
            amount,
        });
    }
    let expected = [
        super::StateDelta::balance(t.from, -amount),
        super::StateDelta::balance(t.to, amount),
    ];
    if tx.deltas != expected {
        return Err(TxError::DeltaMismatch);
    }
    let to_balance = working.balance(t.to).unwrap_or(0);
    to_balance.checked_add(amount).ok_or(TxError::Overflow)?;
    Ok(())
}

fn validate_call(
    tx: &Transaction,
    contract: ContractId,
    method: usize,
    action: &Action,
    working: &LedgerState,
    rules: &Rules,
) -> Result<(), TxError> {
    let spec = rules
        .contracts
        .get(contract)
        .ok_or(TxError::UnknownContract(contract))?;
    if !working.contains(tx.initiator) {
        return Err(TxError::UnknownAccount(tx.initiator));
    }
    let deltas = spec
        .deltas(method, action, working)
        .map_err(|e| TxError::IllegalMethod {
            contract,
            reason: e.to_string(),
        })?;
    if deltas != tx.deltas {
        return Err(TxError::DeltaMismatch);
    }
    for d in &deltas {
        let before = working.balance(d.account).unwrap_or(0);
        let after = before.checked_add(d.delta).ok_or(TxError::Overflow)?;
        if after < 0 {
            return Err(TxError::InsufficientBalance {
                account: d.account,
                balance: before,
                amount: -d.delta,
            });
        }
    }
    Ok(())
}

/// Validates `tx` and commits it to `working`.
pub fn apply_transaction(
    tx: &Transaction,
    working: &mut LedgerState,
    rules: &Rules,
) -> Result<(), TxError> {
    validate_transaction(tx, working, rules)?;
    for d in &tx.deltas {
        working.apply_delta_unchecked(d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const I: AccountId = AccountId(0);
    const J: AccountId = AccountId(1);
    const M: AccountId = AccountId(2);

    fn state(balances: &[(AccountId, Balance)]) -> LedgerState {
        LedgerState::from_balances(balances.iter().copied())
    }

    #[test]
    fn spend_of_entire_balance_is_valid() {
        let s = state(&[(I, 5)]);
        assert_eq!(
            validate_transaction(&Transaction::transfer(I, J, 5), &s, &Rules::default()),
            Ok(())
        );
    }

    #[test]
    fn overspend_is_rejected() {
        let s = state(&[(I, 5)]);
        assert_eq!(
            validate_transaction(&Transaction::transfer(I, J, 6), &s, &Rules::default()),
            Err(TxError::InsufficientBalance {
                account: I,
                balance: 5,
                amount: 6
            })
        );
    }

    #[test]
    fn received_funds_are_spendable_later_in_the_block() {
        let rules = Rules::default();
        let mut s = state(&[(I, 5), (J, 0)]);
        apply_transaction(&Transaction::transfer(I, J, 5), &mut s, &rules).unwrap();
        apply_transaction(&Transaction::transfer(J, M, 3), &mut s, &rules).unwrap();
        assert_eq!(s.to_vector(), vec![0, 2, 3]);
    }

    #[test]
    fn unknown_sender() {
        let s = state(&[(I, 5)]);
        assert_eq!(
            validate_transaction(&Transaction::transfer(J, I, 1), &s, &Rules::default()),
            Err(TxError::UnknownAccount(J))
        );
    }

    #[test]
    fn send_to_unseen_account_creates_it() {
        let mut s = state(&[(I, 5)]);
        apply_transaction(&Transaction::transfer(I, AccountId(99), 2), &mut s, &Rules::default())
            .unwrap();
        assert_eq!(s.balance(AccountId(99)), Some(2));
        assert_eq!(s.index_of(AccountId(99)), Some(1));
    }

    #[test]
    fn forged_deltas_are_rejected() {
        let s = state(&[(I, 5)]);
        let mut tx = Transaction::transfer(I, J, 2);
        tx.deltas[1].delta = 3;
        assert_eq!(
            validate_transaction(&tx, &s, &Rules::default()),
            Err(TxError::DeltaMismatch)
        );
        let mut tx = Transaction::transfer(I, J, 2);
        tx.initiator = M;
        assert_eq!(
            validate_transaction(&tx, &s, &Rules::default()),
            Err(TxError::InitiatorNotInDeltas(M))
        );
    }

    #[test]
    fn self_transfer_is_rejected() {
        let s = state(&[(I, 5)]);
        assert_eq!(
            validate_transaction(&Transaction::transfer(I, I, 1), &s, &Rules::default()),
            Err(TxError::SelfTransfer(I))
        );
    }

    #[test]
    fn call_to_missing_contract() {
        let s = state(&[(I, 5)]);
        let tx = Transaction {
            initiator: I,
            deltas: vec![StateDelta::balance(I, 0)],
            action: ActionRef::Call {
                contract: ContractId(4),
                method: 0,
                action: Action::Nop,
            },
        };
        assert_eq!(
            validate_transaction(&tx, &s, &Rules::default()),
            Err(TxError::UnknownContract(ContractId(4)))
        );
    }
}
