use std::sync::Arc;

use thiserror::Error;

use crate::reward::RewardEvent;

use super::codec::{Canonical, Digest, Encoder};
use super::{apply_block, Block, BlockError, LedgerState, Rules, Transaction, TransactionBlock};

/// `C(K)`: blocks from genesis to the head. Blocks are shared, so cloning a
/// chain or extending a clone is cheap.
#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<Arc<Block>>,
}

impl PartialEq for Chain {
    fn eq(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }
}

impl Chain {
    pub fn genesis(state: LedgerState) -> Self {
        Self {
            blocks: vec![Arc::new(Block::genesis(state))],
        }
    }

    /// Wraps blocks as-is. Nothing is checked; use [`replay_chain`].
    pub fn from_blocks<I: IntoIterator<Item = Block>>(blocks: I) -> Self {
        Self {
            blocks: blocks.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn blocks(&self) -> &[Arc<Block>] {
        &self.blocks
    }

    pub fn genesis_block(&self) -> &Block {
        &self.blocks[0]
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    /// Block height `K` of the head.
    pub fn height(&self) -> u64 {
        self.head().height()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn state(&self) -> &LedgerState {
        &self.head().state
    }

    pub fn total_work(&self) -> f64 {
        self.blocks.iter().map(|b| b.work).sum()
    }

    pub fn head_digest(&self) -> Digest {
        self.head().digest()
    }

    /// Validates and appends the next block.
    pub fn extend(
        &mut self,
        txs: Vec<Transaction>,
        reward: RewardEvent,
        work: f64,
        rules: &Rules,
    ) -> Result<&Block, BlockError> {
        let parent = self.head();
        let body = TransactionBlock::new(parent.height() + 1, txs, reward);
        let state = apply_block(&parent.state, &body, rules)?;
        let block = Block {
            state,
            txs: body,
            parent_link: parent.digest(),
            work,
        };
        self.blocks.push(Arc::new(block));
        Ok(self.head())
    }

    /// Appends without validation; for building adversarial chains.
    pub fn push_unchecked(&mut self, block: Block) {
        self.blocks.push(Arc::new(block));
    }

    /// The chain cut back to `len` blocks.
    pub fn truncated(&self, len: usize) -> Chain {
        Chain {
            blocks: self.blocks[..len.clamp(1, self.blocks.len())].to_vec(),
        }
    }

    /// Index of the first block at which the two chains differ.
    pub fn divergence(&self, other: &Chain) -> usize {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .take_while(|(a, b)| Arc::ptr_eq(a, b) || a == b)
            .count()
    }

    /// Canonical bytes of the whole chain, genesis first.
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.len(self.blocks.len());
        for b in &self.blocks {
            b.encode(&mut e);
        }
        e.finish()
    }
}

pub fn block_digest(block: &Block) -> Digest {
    block.digest()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("chain has no genesis block")]
    Empty,
    #[error("genesis block is malformed: {0}")]
    BadGenesis(String),
    #[error("block {height} does not link to its parent")]
    BrokenLink { height: u64 },
    #[error("block {height} is invalid: {reason}")]
    InvalidBlock { height: u64, reason: InvalidReason },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidReason {
    #[error("{0}")]
    Apply(#[from] BlockError),
    #[error("recorded state differs from the replayed state")]
    StateMismatch,
    #[error("work must be finite and nonnegative")]
    BadWork,
}

/// `x(K) = x(0) + Σ Δx(k)`: replays the chain from genesis and returns the
/// terminal state, or the first defect found.
pub fn replay_chain(chain: &Chain, rules: &Rules) -> Result<LedgerState, ChainError> {
    let genesis = chain.blocks.first().ok_or(ChainError::Empty)?;
    if genesis.height() != 0 || genesis.state.height() != 0 {
        return Err(ChainError::BadGenesis("height must be 0".into()));
    }
    if genesis.parent_link != Digest::ZERO {
        return Err(ChainError::BadGenesis("parent link must be zero".into()));
    }
    if !genesis.txs.txs.is_empty() || genesis.txs.reward != RewardEvent::none() {
        return Err(ChainError::BadGenesis("genesis carries no transactions".into()));
    }
    if !genesis.state.is_legal() {
        return Err(ChainError::BadGenesis("negative balance".into()));
    }
    replay_suffix(chain, 1, rules)
}

/// Replays blocks `start..` assuming blocks `..start` are already known to
/// be valid.
pub fn replay_suffix(chain: &Chain, start: usize, rules: &Rules) -> Result<LedgerState, ChainError> {
    let blocks = &chain.blocks;
    if blocks.is_empty() {
        return Err(ChainError::Empty);
    }
    let start = start.max(1);
    if start > blocks.len() {
        return Ok(chain.head().state.clone());
    }
    let mut state = blocks[start - 1].state.clone();
    let mut parent_digest = blocks[start - 1].digest();
    for block in &blocks[start..] {
        let height = block.height();
        if block.parent_link != parent_digest {
            return Err(ChainError::BrokenLink { height });
        }
        if !(block.work.is_finite() && block.work >= 0.0) {
            return Err(ChainError::InvalidBlock {
                height,
                reason: InvalidReason::BadWork,
            });
        }
        let next = apply_block(&state, &block.txs, rules).map_err(|e| ChainError::InvalidBlock {
            height,
            reason: e.into(),
        })?;
        if next != block.state {
            return Err(ChainError::InvalidBlock {
                height,
                reason: InvalidReason::StateMismatch,
            });
        }
        state = next;
        parent_digest = block.digest();
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::AccountId;
    use crate::reward::RewardSchedule;

    const A: AccountId = AccountId(0);
    const B: AccountId = AccountId(1);

    fn sample_chain() -> Chain {
        let rules = Rules::default();
        let mut c = Chain::genesis(LedgerState::from_balances([(A, 100)]));
        c.extend(vec![Transaction::transfer(A, B, 30)], RewardEvent::none(), 1.0, &rules)
            .unwrap();
        c.extend(vec![Transaction::transfer(B, A, 10)], RewardEvent::to_miner(5, B), 1.0, &rules)
            .unwrap();
        c.extend(vec![], RewardEvent::none(), 2.0, &rules).unwrap();
        c
    }

    #[test]
    fn genesis_only_replays_to_initial_state() {
        let s = LedgerState::from_balances([(A, 9)]);
        assert_eq!(replay_chain(&Chain::genesis(s.clone()), &Rules::default()), Ok(s));
    }

    #[test]
    fn replay_reaches_head_state() {
        let c = sample_chain();
        let s = replay_chain(&c, &Rules::default()).unwrap();
        assert_eq!(&s, c.state());
        assert_eq!(s.to_vector(), vec![80, 25]);
        assert_eq!(s.height(), 3);
    }

    #[test]
    fn reward_only_chain_sums_schedule() {
        let schedule = RewardSchedule::bitcoin();
        let rules = Rules::with_schedule(schedule.clone());
        let mut c = Chain::genesis(LedgerState::genesis());
        for k in 1..=25u64 {
            let miner = AccountId(k % 4);
            c.extend(vec![], RewardEvent::to_miner(schedule.mu(k), miner), 1.0, &rules)
                .unwrap();
        }
        let s = replay_chain(&c, &rules).unwrap();
        assert_eq!(s.total() as u128, schedule.cumulative(25));
    }

    #[test]
    fn digest_is_deterministic_and_field_sensitive() {
        let c = sample_chain();
        let b = c.blocks()[1].as_ref().clone();
        assert_eq!(block_digest(&b), block_digest(&b.clone()));
        let mut changed = b.clone();
        changed.txs.txs[0].deltas[0].delta -= 1;
        assert_ne!(block_digest(&b), block_digest(&changed));
        let mut changed = b.clone();
        changed.work = 1.5;
        assert_ne!(block_digest(&b), block_digest(&changed));
        let mut changed = b;
        changed.parent_link = Digest::ZERO;
        assert_ne!(block_digest(&changed), block_digest(&c.blocks()[1]));
    }

    #[test]
    fn tampered_delta_is_caught_at_the_tamper_point() {
        let c = sample_chain();
        let mut blocks: Vec<Block> = c.blocks().iter().map(|b| b.as_ref().clone()).collect();
        blocks[1].txs.txs[0] = Transaction::transfer(A, B, 31);
        let err = replay_chain(&Chain::from_blocks(blocks), &Rules::default()).unwrap_err();
        assert!(
            matches!(
                err,
                ChainError::InvalidBlock { height: 1, .. } | ChainError::BrokenLink { height: 2 }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn reordered_blocks_break_links() {
        let c = sample_chain();
        let mut blocks: Vec<Block> = c.blocks().iter().map(|b| b.as_ref().clone()).collect();
        blocks.swap(2, 3);
        let err = replay_chain(&Chain::from_blocks(blocks), &Rules::default()).unwrap_err();
        assert_eq!(err, ChainError::BrokenLink { height: 3 });
    }

    #[test]
    fn replay_is_deterministic() {
        let c = sample_chain();
        let a = replay_chain(&c, &Rules::default()).unwrap();
        let b = replay_chain(&c, &Rules::default()).unwrap();
        assert_eq!(a.to_canonical_bytes(), b.to_canonical_bytes());
    }

    #[test]
    fn divergence_and_suffix_replay() {
        let rules = Rules::default();
        let c = sample_chain();
        let mut d = c.truncated(2);
        d.extend(vec![], RewardEvent::to_miner(1, A), 5.0, &rules).unwrap();
        assert_eq!(c.divergence(&d), 2);
        assert_eq!(replay_suffix(&d, 2, &rules).unwrap(), replay_chain(&d, &rules).unwrap());
    }
}
