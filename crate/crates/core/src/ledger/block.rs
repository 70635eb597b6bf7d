use std::collections::BTreeMap;

use thiserror::Error;

use crate::reward::{RewardError, RewardEvent};

use super::codec::{Canonical, Digest};
use super::{apply_transaction, AccountId, Balance, LedgerState, Rules, Transaction, TxError};

/// `TX(k)`: the ordered transactions of block `k` plus its minting event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransactionBlock {
    pub height: u64,
    pub txs: Vec<Transaction>,
    pub reward: RewardEvent,
}

impl TransactionBlock {
    pub fn new(height: u64, txs: Vec<Transaction>, reward: RewardEvent) -> Self {
        Self {
            height,
            txs,
            reward,
        }
    }

    pub fn empty(height: u64) -> Self {
        Self::new(height, Vec::new(), RewardEvent::none())
    }

    /// `T_a(k)`: the transactions touching `account`, in block order.
    pub fn touching(&self, account: AccountId) -> impl Iterator<Item = &Transaction> + '_ {
        self.txs.iter().filter(move |tx| tx.touches(account))
    }
}

/// `B(k) = (x(k), TX(k))` plus the link to its parent and its work.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub state: LedgerState,
    pub txs: TransactionBlock,
    pub parent_link: Digest,
    pub work: f64,
}

impl Block {
    pub fn genesis(state: LedgerState) -> Self {
        Self {
            state: state.with_height(0),
            txs: TransactionBlock::empty(0),
            parent_link: Digest::ZERO,
            work: 0.0,
        }
    }

    pub fn height(&self) -> u64 {
        self.txs.height
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.to_canonical_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("block height {found} does not follow state height {state}")]
    HeightMismatch { state: u64, found: u64 },
    #[error("transaction {index}: {source}")]
    Transaction {
        index: usize,
        #[source]
        source: TxError,
    },
    #[error("reward {found} differs from the scheduled {expected}")]
    RewardMismatch { expected: u64, found: u64 },
    #[error("reward: {0}")]
    Reward(#[from] RewardError),
    #[error("reward credit overflows {0}")]
    Overflow(AccountId),
}

/// `x(k) = x(k-1) + Δx(k)`: applies every transaction in order against a
/// working copy, then credits the block reward.
pub fn apply_block(
    state: &LedgerState,
    block: &TransactionBlock,
    rules: &Rules,
) -> Result<LedgerState, BlockError> {
    if block.height != state.height() + 1 {
        return Err(BlockError::HeightMismatch {
            state: state.height(),
            found: block.height,
        });
    }
    if let Some(schedule) = &rules.schedule {
        let expected = schedule.mu(block.height);
        if block.reward.mu != expected {
            return Err(BlockError::RewardMismatch {
                expected,
                found: block.reward.mu,
            });
        }
    }
    let mut working = state.clone();
    for (index, tx) in block.txs.iter().enumerate() {
        apply_transaction(tx, &mut working, rules)
            .map_err(|source| BlockError::Transaction { index, source })?;
    }
    for (account, amount) in block.reward.allocation()? {
        let amount = Balance::try_from(amount).map_err(|_| BlockError::Overflow(account))?;
        let slot = working.entry(account);
        slot.balance = slot
            .balance
            .checked_add(amount)
            .ok_or(BlockError::Overflow(account))?;
    }
    working.set_height(block.height);
    Ok(working)
}

/// The order-free relaxation of per-send validity: every account ends the
/// block with `x_i + Σ inflow − Σ outflow ≥ 0`, using the declared deltas
/// and ignoring the reward.
pub fn satisfies_net_flow(state: &LedgerState, block: &TransactionBlock) -> bool {
    let mut net: BTreeMap<AccountId, i128> = BTreeMap::new();
    for tx in &block.txs {
        for d in &tx.deltas {
            *net.entry(d.account).or_insert(0) += i128::from(d.delta);
        }
    }
    net.into_iter()
        .all(|(a, flow)| i128::from(state.balance(a).unwrap_or(0)) + flow >= 0)
}
