//! Linear time-expanding (LTE) view of the ledger.
//!
//! The state `x(k)` is the balance vector in account-creation order, and
//!
//! ```text
//! x(k+1) = A_k x(k) + B_k u(k) + μ_k v(k)
//! ```
//!
//! where `A_k = [I; 0]` pads the state with zeros for newly created accounts
//! and `B_k` is the all-to-all incidence matrix over edges
//! `(i, j) ∈ A_k × A_{k+1}, i ≠ j`. Neither operator is ever built at scale:
//! [`apply_a`] and [`apply_b`] act directly on vectors, and
//! [`materialize_dense`] exists for cross-checking small cases.
//!
//! In this view an account is its index, so a [`RewardEvent`] passed to
//! [`step`] keys its distribution by `AccountId(index)`. [`lower_block`]
//! translates a ledger block into that form.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ledger::{AccountId, ActionRef, Balance, LedgerState, TransactionBlock};
use crate::reward::{DistributionVector, RewardError, RewardEvent};

/// Largest `n_{k+1}` for which [`materialize_dense`] builds matrices by default.
pub const DEFAULT_DENSE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LteError {
    #[error("account count shrinks from {n_k} to {n_k1}")]
    Shrinking { n_k: usize, n_k1: usize },
    #[error("state has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("action {index} sends from account {account} to itself")]
    SelfLoop { index: usize, account: usize },
    #[error("action {index} references account {account}, limit {limit}")]
    IndexOutOfRange {
        index: usize,
        account: usize,
        limit: usize,
    },
    #[error("action {index}: account {account} holds {balance}, sends {amount}")]
    InsufficientBalance {
        index: usize,
        account: usize,
        balance: Balance,
        amount: u64,
    },
    #[error("{n} accounts exceed the dense cap of {cap}")]
    TooLargeForDense { n: usize, cap: usize },
    #[error("block is not expressible as flows: {0}")]
    NotRepresentable(String),
    #[error("arithmetic overflow")]
    Overflow,
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Dimensions of one step: `n_k` accounts before, `n_{k+1}` after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionStep {
    n_k: usize,
    n_k1: usize,
}

impl ExpansionStep {
    pub fn new(n_k: usize, n_k1: usize) -> Result<Self, LteError> {
        if n_k1 < n_k {
            return Err(LteError::Shrinking { n_k, n_k1 });
        }
        Ok(Self { n_k, n_k1 })
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    pub fn n_k1(&self) -> usize {
        self.n_k1
    }

    /// `m_k = |A_k × A_{k+1}| − n_k`: every ordered pair except self-loops.
    pub fn edge_count(&self) -> usize {
        self.n_k * self.n_k1 - self.n_k
    }

    /// `n_{k+1} · (n_k − 1)`, the count quoted alongside the edge set. It
    /// agrees with [`edge_count`](Self::edge_count) only when no accounts
    /// are added.
    pub fn quoted_edge_count(&self) -> usize {
        self.n_k1 * self.n_k.saturating_sub(1)
    }

    /// Column of edge `(from, to)` in `B_k`: edges are ordered by sender,
    /// then receiver, skipping self-loops.
    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        if from >= self.n_k || to >= self.n_k1 || from == to {
            return None;
        }
        Some(from * (self.n_k1 - 1) + if to < from { to } else { to - 1 })
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.n_k {
            for j in 0..self.n_k1 {
                if i != j {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// A send `u_(i,j)` of `amount` base units along edge `(from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowAction {
    pub from: usize,
    pub to: usize,
    pub amount: u64,
}

impl FlowAction {
    pub fn new(from: usize, to: usize, amount: u64) -> Self {
        Self { from, to, amount }
    }
}

/// Sparse `u(k)`: only the active edges, in processing order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputVector {
    pub actions: Vec<FlowAction>,
}

impl InputVector {
    pub fn new(actions: Vec<FlowAction>) -> Self {
        Self { actions }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check_indices(&self, step: ExpansionStep) -> Result<(), LteError> {
        for (index, a) in self.actions.iter().enumerate() {
            if a.from == a.to {
                return Err(LteError::SelfLoop {
                    index,
                    account: a.from,
                });
            }
            if a.from >= step.n_k {
                return Err(LteError::IndexOutOfRange {
                    index,
                    account: a.from,
                    limit: step.n_k,
                });
            }
            if a.to >= step.n_k1 {
                return Err(LteError::IndexOutOfRange {
                    index,
                    account: a.to,
                    limit: step.n_k1,
                });
            }
        }
        Ok(())
    }

    /// The dense `u(k) ∈ Z^{m_k}`; repeated edges accumulate.
    pub fn to_dense(&self, step: ExpansionStep) -> Result<Vec<i64>, LteError> {
        self.check_indices(step)?;
        let mut u = vec![0i64; step.edge_count()];
        for a in &self.actions {
            let e = step.edge_index(a.from, a.to).expect("indices checked");
            u[e] = u[e]
                .checked_add(i64::try_from(a.amount).map_err(|_| LteError::Overflow)?)
                .ok_or(LteError::Overflow)?;
        }
        Ok(u)
    }
}

/// `A_k x`: carries balances forward and zero-fills new accounts.
pub fn apply_a(step: ExpansionStep, x: &[Balance]) -> Result<Vec<Balance>, LteError> {
    if x.len() != step.n_k {
        return Err(LteError::DimensionMismatch {
            expected: step.n_k,
            found: x.len(),
        });
    }
    let mut out = Vec::with_capacity(step.n_k1);
    out.extend_from_slice(x);
    out.resize(step.n_k1, 0);
    Ok(out)
}

/// `B_k u`: the sender of each action loses its amount, the receiver gains
/// it. The entries always sum to zero.
pub fn apply_b(step: ExpansionStep, u: &InputVector) -> Result<Vec<Balance>, LteError> {
    u.check_indices(step)?;
    let mut delta = vec![0 as Balance; step.n_k1];
    for a in &u.actions {
        let amount = Balance::try_from(a.amount).map_err(|_| LteError::Overflow)?;
        delta[a.from] = delta[a.from].checked_sub(amount).ok_or(LteError::Overflow)?;
        delta[a.to] = delta[a.to].checked_add(amount).ok_or(LteError::Overflow)?;
    }
    Ok(delta)
}

/// `y = 1'x`.
pub fn output_y(x: &[Balance]) -> Balance {
    x.iter().sum()
}

/// Processes the actions in order and checks each send against the
/// sender's balance at that point.
pub fn check_strict(step: ExpansionStep, x: &[Balance], u: &InputVector) -> Result<(), LteError> {
    u.check_indices(step)?;
    let mut working = apply_a(step, x)?;
    for (index, a) in u.actions.iter().enumerate() {
        let amount = Balance::try_from(a.amount).map_err(|_| LteError::Overflow)?;
        if working[a.from] < amount {
            return Err(LteError::InsufficientBalance {
                index,
                account: a.from,
                balance: working[a.from],
                amount: a.amount,
            });
        }
        working[a.from] -= amount;
        working[a.to] = working[a.to].checked_add(amount).ok_or(LteError::Overflow)?;
    }
    Ok(())
}

/// `x_i + Σ_j u_(j,i) − Σ_j u_(i,j) ≥ 0` for every account, regardless of
/// order.
pub fn net_flow_satisfied(step: ExpansionStep, x: &[Balance], u: &InputVector) -> Result<bool, LteError> {
    let ax = apply_a(step, x)?;
    let bu = apply_b(step, u)?;
    Ok(ax.iter().zip(&bu).all(|(a, b)| i128::from(*a) + i128::from(*b) >= 0))
}

/// `Σ_j u_(i,j) ≤ x_i(k)` for every sender: the per-block budget using
/// only balances held at the start of the block.
pub fn within_budget(step: ExpansionStep, x: &[Balance], u: &InputVector) -> Result<bool, LteError> {
    u.check_indices(step)?;
    let mut spent = vec![0u128; step.n_k];
    for a in &u.actions {
        spent[a.from] += u128::from(a.amount);
    }
    Ok(x.iter()
        .zip(&spent)
        .all(|(bal, s)| *bal >= 0 && *s <= *bal as u128))
}

/// `x(k+1) = A_k x(k) + B_k u(k) + μ_k v(k)`, after strict validation of
/// `u` against `x`.
pub fn step(
    step: ExpansionStep,
    x: &[Balance],
    u: &InputVector,
    reward: &RewardEvent,
) -> Result<Vec<Balance>, LteError> {
    check_strict(step, x, u)?;
    let mut next = apply_a(step, x)?;
    let bu = apply_b(step, u)?;
    for (xi, d) in next.iter_mut().zip(&bu) {
        *xi = xi.checked_add(*d).ok_or(LteError::Overflow)?;
    }
    for (account, amount) in reward.allocation()? {
        let i = account.0 as usize;
        if i >= step.n_k1 {
            return Err(LteError::IndexOutOfRange {
                index: usize::MAX,
                account: i,
                limit: step.n_k1,
            });
        }
        let amount = Balance::try_from(amount).map_err(|_| LteError::Overflow)?;
        next[i] = next[i].checked_add(amount).ok_or(LteError::Overflow)?;
    }
    Ok(next)
}

/// A ledger block expressed in index space.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredBlock {
    pub step: ExpansionStep,
    pub input: InputVector,
    /// Reward keyed by `AccountId(index)`, with weights equal to the
    /// ledger's integer allocation over `μ_k`.
    pub reward: RewardEvent,
    /// Ledger ids of the accounts this block creates, in index order.
    pub new_accounts: Vec<AccountId>,
}

/// Translates a transfer-only ledger block applied to `state` into LTE
/// inputs. New accounts get indices in the order the ledger creates them.
/// Senders must exist before the block, as edges start in `A_k`.
pub fn lower_block(state: &LedgerState, block: &TransactionBlock) -> Result<LoweredBlock, LteError> {
    let n_k = state.account_count();
    let mut new_accounts: Vec<AccountId> = Vec::new();
    let index_of = |id: AccountId, new_accounts: &mut Vec<AccountId>| -> usize {
        if let Some(i) = state.index_of(id) {
            return i;
        }
        if let Some(p) = new_accounts.iter().position(|a| *a == id) {
            return n_k + p;
        }
        new_accounts.push(id);
        n_k + new_accounts.len() - 1
    };

    let mut actions = Vec::with_capacity(block.txs.len());
    for (index, tx) in block.txs.iter().enumerate() {
        let t = match &tx.action {
            ActionRef::Transfer(t) => t,
            ActionRef::Call { .. } => {
                return Err(LteError::NotRepresentable(format!(
                    "transaction {index} is a contract call"
                )))
            }
        };
        let from = state.index_of(t.from).ok_or(LteError::IndexOutOfRange {
            index,
            account: n_k,
            limit: n_k,
        })?;
        let to = index_of(t.to, &mut new_accounts);
        actions.push(FlowAction::new(from, to, t.amount));
    }

    let allocation = block.reward.allocation()?;
    let mut weights = Vec::with_capacity(allocation.len());
    for (account, amount) in &allocation {
        let i = index_of(*account, &mut new_accounts);
        weights.push((AccountId(i as u64), *amount, block.reward.mu));
    }
    let distribution = if weights.is_empty() {
        DistributionVector::empty()
    } else {
        DistributionVector::from_weights(weights)?
    };

    Ok(LoweredBlock {
        step: ExpansionStep::new(n_k, n_k + new_accounts.len())?,
        input: InputVector::new(actions),
        reward: RewardEvent::new(block.reward.mu, distribution),
        new_accounts,
    })
}

/// A small dense integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul_vec(&self, v: &[i64]) -> Vec<i64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    pub fn column_sum(&self, c: usize) -> i64 {
        (0..self.rows).map(|r| self.get(r, c)).sum()
    }

    /// Whitespace-separated rows, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{}", self.get(r, c));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseOperators {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub edges: Vec<(usize, usize)>,
    /// Column count of `b`, `n_k · n_{k+1} − n_k`.
    pub edge_count: usize,
    /// `n_{k+1} · (n_k − 1)`, reported for comparison.
    pub quoted_edge_count: usize,
}

/// Builds `A_k` and `B_k` explicitly. Refuses when `n_{k+1} > cap`.
pub fn materialize_dense(step: ExpansionStep, cap: usize) -> Result<DenseOperators, LteError> {
    if step.n_k1 > cap {
        return Err(LteError::TooLargeForDense {
            n: step.n_k1,
            cap,
        });
    }
    let mut a = DenseMatrix::zeros(step.n_k1, step.n_k);
    for i in 0..step.n_k {
        a.set(i, i, 1);
    }
    let edges = step.edges();
    let mut b = DenseMatrix::zeros(step.n_k1, edges.len());
    for (e, &(i, j)) in edges.iter().enumerate() {
        b.set(i, e, -1);
        b.set(j, e, 1);
    }
    Ok(DenseOperators {
        a,
        b,
        edge_count: edges.len(),
        quoted_edge_count: step.quoted_edge_count(),
        edges,
    })
}
