//! Fork choice between competing chains and a simulated peer-to-peer
//! network that uses it.
//!
//! The score of a chain is its total work, with the head digest breaking
//! exact ties. Digests of distinct chains differ, so the order is strict.

mod network;
mod topology;

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

use crate::ledger::{replay_chain, Chain, ChainError, Digest, Rules};

pub use network::{
    ConvergenceReport, MiningPolicy, NetworkStats, NetworkTopology, Node, NodeId, WorkRange,
};
pub use topology::{Edge, TopologyKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("chain is invalid: {0}")]
    InvalidChain(#[from] ChainError),
    #[error("chains start from different genesis blocks")]
    GenesisMismatch,
    #[error("topology: {0}")]
    BadTopology(String),
}

/// `Ψ(C)`: total work, then head digest.
#[derive(Debug, Clone, Copy)]
pub struct PsiScore {
    pub total_work: f64,
    pub tiebreak: Digest,
}

impl PartialEq for PsiScore {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PsiScore {}

impl PartialOrd for PsiScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PsiScore {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_work
            .total_cmp(&other.total_work)
            .then_with(|| self.tiebreak.cmp(&other.tiebreak))
    }
}

/// Score without validating the chain.
pub fn score(chain: &Chain) -> PsiScore {
    PsiScore {
        total_work: chain.total_work(),
        tiebreak: chain.head_digest(),
    }
}

/// Scores a chain after replaying it from genesis.
pub fn psi(chain: &Chain, rules: &Rules) -> Result<PsiScore, ConsensusError> {
    replay_chain(chain, rules)?;
    Ok(score(chain))
}

/// Orders two chains by score, hashing heads only when the work ties.
pub fn compare_chains(a: &Chain, b: &Chain) -> Ordering {
    if Arc::ptr_eq(&a.blocks()[a.len() - 1], &b.blocks()[b.len() - 1]) {
        return Ordering::Equal;
    }
    a.total_work()
        .total_cmp(&b.total_work())
        .then_with(|| a.head_digest().cmp(&b.head_digest()))
}

/// `C* = argmax Ψ` over the two chains. Both are assumed valid.
pub fn resolve(c1: &Chain, c2: &Chain) -> Result<Chain, ConsensusError> {
    if c1.genesis_block().digest() != c2.genesis_block().digest() {
        return Err(ConsensusError::GenesisMismatch);
    }
    Ok(match compare_chains(c1, c2) {
        Ordering::Less => c2.clone(),
        _ => c1.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{AccountId, LedgerState};
    use crate::reward::RewardEvent;

    fn chain_with_work(works: &[f64], tag: u64) -> Chain {
        let rules = Rules::default();
        let mut c = Chain::genesis(LedgerState::genesis());
        for w in works {
            c.extend(vec![], RewardEvent::to_miner(1, AccountId(tag)), *w, &rules)
                .unwrap();
        }
        c
    }

    #[test]
    fn genesis_scores_zero() {
        let c = Chain::genesis(LedgerState::genesis());
        assert_eq!(psi(&c, &Rules::default()).unwrap().total_work, 0.0);
    }

    #[test]
    fn more_work_wins() {
        let a = chain_with_work(&[1.0, 1.0, 1.0], 0);
        let b = chain_with_work(&[1.0, 1.0, 2.0], 0);
        assert!(psi(&b, &Rules::default()).unwrap() > psi(&a, &Rules::default()).unwrap());
        assert_eq!(resolve(&a, &b).unwrap(), b);
    }

    #[test]
    fn equal_work_is_still_strictly_ordered() {
        let a = chain_with_work(&[1.0, 2.0], 1);
        let b = chain_with_work(&[2.0, 1.0], 2);
        assert_ne!(a, b);
        let (sa, sb) = (score(&a), score(&b));
        assert_eq!(sa.total_work, sb.total_work);
        assert_ne!(sa, sb);
        assert_eq!(resolve(&a, &b).unwrap(), resolve(&b, &a).unwrap());
    }

    #[test]
    fn resolve_identity_and_extension() {
        let a = chain_with_work(&[1.0], 0);
        assert_eq!(resolve(&a, &a).unwrap(), a);
        let mut b = a.clone();
        b.extend(vec![], RewardEvent::none(), 0.5, &Rules::default()).unwrap();
        assert_eq!(resolve(&a, &b).unwrap(), b);
        assert_eq!(resolve(&b, &a).unwrap(), b);
    }

    #[test]
    fn different_genesis_rejected() {
        let a = Chain::genesis(LedgerState::genesis());
        let b = Chain::genesis(LedgerState::from_balances([(AccountId(0), 1)]));
        assert_eq!(resolve(&a, &b), Err(ConsensusError::GenesisMismatch));
    }

    #[test]
    fn psi_rejects_invalid_chain() {
        let mut c = chain_with_work(&[1.0], 0);
        let mut bad = c.head().clone();
        bad.work = -1.0;
        c.push_unchecked(bad);
        assert!(matches!(psi(&c, &Rules::default()), Err(ConsensusError::InvalidChain(_))));
    }
}
