//! Synthetic agent behaviour: which accounts send, to whom, and how much.
//!
//! Every generated block is valid under strict ordering, and senders are
//! always accounts that existed before the block so the block also has an
//! LTE form.

use std::collections::{BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{AccountId, Balance, LedgerState, Transaction};
use crate::reward::DistributionVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AgentPolicy {
    /// Any active agent sends to any other agent.
    #[default]
    UniformRandom,
    /// Agent 0 is a hub: spokes send to it, it sends to spokes.
    HubAndSpoke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardPolicy {
    /// One agent, drawn uniformly, receives the whole reward.
    #[default]
    SingleMiner,
    /// The reward is split evenly over all agents.
    Pool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub agents: u64,
    pub policy: AgentPolicy,
    pub sends_per_block: usize,
    /// Fraction of agents that never send.
    pub dormant_fraction: f64,
    pub reward_policy: RewardPolicy,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            agents: 3,
            policy: AgentPolicy::UniformRandom,
            sends_per_block: 4,
            dormant_fraction: 0.0,
            reward_policy: RewardPolicy::SingleMiner,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workload {
    config: WorkloadConfig,
    agents: Vec<AccountId>,
    active: Vec<AccountId>,
}

impl Workload {
    /// Agents are `AccountId(0..agents)`; the dormant subset is drawn here.
    pub fn new<R: Rng + ?Sized>(config: WorkloadConfig, rng: &mut R) -> Self {
        let agents: Vec<AccountId> = (0..config.agents).map(AccountId).collect();
        let dormant_count = ((config.agents as f64) * config.dormant_fraction.clamp(0.0, 1.0))
            .floor() as usize;
        let dormant: BTreeSet<AccountId> = agents
            .choose_multiple(rng, dormant_count)
            .copied()
            .collect();
        let active = agents.iter().copied().filter(|a| !dormant.contains(a)).collect();
        Self {
            config,
            agents,
            active,
        }
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AccountId] {
        &self.agents
    }

    pub fn active(&self) -> &[AccountId] {
        &self.active
    }

    /// Transactions for the next block on top of `state`.
    pub fn block_transactions<R: Rng + ?Sized>(&self, state: &LedgerState, rng: &mut R) -> Vec<Transaction> {
        let receivers: &[AccountId] = &self.agents;
        match self.config.policy {
            AgentPolicy::UniformRandom => random_transfers(
                state,
                &self.active,
                receivers,
                self.config.sends_per_block,
                rng,
            ),
            AgentPolicy::HubAndSpoke => hub_transfers(
                state,
                &self.active,
                receivers,
                self.config.sends_per_block,
                rng,
            ),
        }
    }

    pub fn reward_distribution<R: Rng + ?Sized>(&self, rng: &mut R) -> DistributionVector {
        match self.config.reward_policy {
            RewardPolicy::SingleMiner => match self.agents.choose(rng) {
                Some(a) => DistributionVector::sole(*a),
                None => DistributionVector::empty(),
            },
            RewardPolicy::Pool => DistributionVector::uniform(self.agents.iter().copied()),
        }
    }
}

struct Working<'a> {
    state: &'a LedgerState,
    balances: HashMap<AccountId, Balance>,
}

impl<'a> Working<'a> {
    fn new(state: &'a LedgerState) -> Self {
        Self {
            state,
            balances: HashMap::new(),
        }
    }

    fn balance(&self, a: AccountId) -> Balance {
        self.balances
            .get(&a)
            .copied()
            .or_else(|| self.state.balance(a))
            .unwrap_or(0)
    }

    fn send(&mut self, from: AccountId, to: AccountId, amount: Balance) {
        let f = self.balance(from) - amount;
        let t = self.balance(to) + amount;
        self.balances.insert(from, f);
        self.balances.insert(to, t);
    }
}

const SENDER_ATTEMPTS: usize = 8;

fn pick_sender<R: Rng + ?Sized>(
    working: &Working<'_>,
    senders: &[AccountId],
    rng: &mut R,
) -> Option<AccountId> {
    for _ in 0..SENDER_ATTEMPTS {
        let s = *senders.choose(rng)?;
        if working.state.contains(s) && working.balance(s) > 0 {
            return Some(s);
        }
    }
    None
}

/// Up to `count` sends, each from a funded sender that existed before the
/// block, to a different account drawn from `receivers`. Amounts are uniform
/// in `1..=balance` at the moment of sending.
pub fn random_transfers<R: Rng + ?Sized>(
    state: &LedgerState,
    senders: &[AccountId],
    receivers: &[AccountId],
    count: usize,
    rng: &mut R,
) -> Vec<Transaction> {
    let mut working = Working::new(state);
    let mut txs = Vec::with_capacity(count);
    for _ in 0..count {
        let Some(from) = pick_sender(&working, senders, rng) else {
            continue;
        };
        let Some(to) = (0..SENDER_ATTEMPTS)
            .filter_map(|_| receivers.choose(rng).copied())
            .find(|r| *r != from)
        else {
            continue;
        };
        let amount = rng.random_range(1..=working.balance(from));
        working.send(from, to, amount);
        txs.push(Transaction::transfer(from, to, amount as u64));
    }
    txs
}

fn hub_transfers<R: Rng + ?Sized>(
    state: &LedgerState,
    senders: &[AccountId],
    receivers: &[AccountId],
    count: usize,
    rng: &mut R,
) -> Vec<Transaction> {
    let Some(&hub) = receivers.first() else {
        return Vec::new();
    };
    let spokes: Vec<AccountId> = receivers.iter().copied().filter(|a| *a != hub).collect();
    if spokes.is_empty() {
        return Vec::new();
    }
    let mut working = Working::new(state);
    let mut txs = Vec::with_capacity(count);
    for _ in 0..count {
        let Some(from) = pick_sender(&working, senders, rng) else {
            continue;
        };
        let to = if from == hub {
            *spokes.choose(rng).expect("spokes non-empty")
        } else {
            hub
        };
        let amount = rng.random_range(1..=working.balance(from));
        working.send(from, to, amount);
        txs.push(Transaction::transfer(from, to, amount as u64));
    }
    txs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{apply_block, Rules, TransactionBlock};
    use crate::reward::RewardEvent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_blocks_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for policy in [AgentPolicy::UniformRandom, AgentPolicy::HubAndSpoke] {
            let w = Workload::new(
                WorkloadConfig {
                    agents: 12,
                    policy,
                    sends_per_block: 30,
                    dormant_fraction: 0.25,
                    ..Default::default()
                },
                &mut rng,
            );
            assert_eq!(w.active().len(), 9);
            let mut state = LedgerState::from_balances((0..6).map(|i| (AccountId(i), 1_000)));
            for k in 1..=50 {
                let txs = w.block_transactions(&state, &mut rng);
                let block = TransactionBlock::new(k, txs, RewardEvent::none());
                state = apply_block(&state, &block, &Rules::default()).unwrap();
            }
            assert_eq!(state.total(), 6_000);
        }
    }

    #[test]
    fn nobody_funded_means_no_sends() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let txs = random_transfers(
            &LedgerState::genesis(),
            &[AccountId(0), AccountId(1)],
            &[AccountId(0), AccountId(1)],
            5,
            &mut rng,
        );
        assert!(txs.is_empty());
    }
}
