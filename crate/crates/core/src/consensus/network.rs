use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{
    replay_suffix, AccountId, Block, Chain, Digest, LedgerState, Rules, StateDelta, Transaction,
    TransactionBlock,
};
use crate::reward::RewardEvent;
use crate::workload::random_transfers;

use super::topology::{components, latency_adjacency, Edge, TopologyKind};
use super::{compare_chains, score, ConsensusError, PsiScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node#{}", self.0)
    }
}

/// A peer holding its own belief of the ledger.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub chain: Chain,
    pub peers: BTreeSet<NodeId>,
    pub controlled_accounts: BTreeSet<AccountId>,
}

impl Node {
    /// The account that receives this node's mining rewards.
    pub fn miner_account(&self) -> AccountId {
        *self
            .controlled_accounts
            .iter()
            .next()
            .expect("every node controls an account")
    }

    pub fn score(&self) -> PsiScore {
        score(&self.chain)
    }
}

/// Work credited to a mined block, drawn uniformly from `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkRange {
    pub min: f64,
    pub max: f64,
}

impl Default for WorkRange {
    fn default() -> Self {
        Self { min: 1.0, max: 1.0 }
    }
}

impl WorkRange {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.max >= self.min) {
            return Err(ConsensusError::BadTopology(format!(
                "work range [{}, {}] must satisfy 0 < min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }
}

/// Who mines each round and what their blocks contain.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningPolicy {
    /// Chance that a given node mines in a given round.
    pub probability: f64,
    pub work: WorkRange,
    /// Sends from the miner's own accounts included in each block.
    pub sends_per_block: usize,
    /// Restrict mining to these nodes; everyone may mine when `None`.
    pub miners: Option<BTreeSet<NodeId>>,
}

impl Default for MiningPolicy {
    fn default() -> Self {
        Self {
            probability: 0.1,
            work: WorkRange::default(),
            sends_per_block: 0,
            miners: None,
        }
    }
}

impl MiningPolicy {
    /// No mining at all.
    pub fn idle() -> Self {
        Self {
            probability: 0.0,
            ..Self::default()
        }
    }

    /// Only `node` mines, every round.
    pub fn single(node: NodeId) -> Self {
        Self {
            probability: 1.0,
            miners: Some(BTreeSet::from([node])),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NetworkStats {
    pub blocks_mined: u64,
    pub adoptions: u64,
    pub messages_sent: u64,
    /// Gossiped chains that failed validation.
    pub dropped_invalid: u64,
    /// Better chains refused because they rewrite finalized blocks.
    pub rejected_final: u64,
}

#[derive(Debug, Clone)]
struct Message {
    due: u64,
    to: NodeId,
    chain: Chain,
}

/// Agreement snapshot across all nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub round: u64,
    /// Head digests with the number of nodes holding each, most common first.
    pub histogram: Vec<(String, usize)>,
    /// Share of nodes holding the most common head.
    pub agreement: f64,
    /// Round since which every node has held the same head, if they do now.
    pub converged_since: Option<u64>,
}

/// The simulated peer-to-peer network.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    nodes: Vec<Node>,
    edges: BTreeSet<Edge>,
    latency: BTreeMap<Edge, u32>,
    severed: BTreeSet<Edge>,
    rules: Arc<Rules>,
    finality_depth: Option<usize>,
    round: u64,
    in_flight: Vec<Message>,
    injections: Vec<NodeId>,
    stats: NetworkStats,
    agreed: Option<(Digest, u64)>,
}

impl NetworkTopology {
    /// Nodes `0..n` over the given links, all starting from one genesis
    /// block. Node `i` controls `AccountId(i)`.
    pub fn new(
        n: usize,
        edges: BTreeSet<Edge>,
        genesis: LedgerState,
        rules: Rules,
    ) -> Result<Self, ConsensusError> {
        if n == 0 {
            return Err(ConsensusError::BadTopology("network has no nodes".into()));
        }
        for e in &edges {
            if e.1 .0 >= n || e.0 == e.1 {
                return Err(ConsensusError::BadTopology(format!(
                    "edge ({}, {}) is invalid for {n} nodes",
                    e.0, e.1
                )));
            }
        }
        let chain = Chain::genesis(genesis);
        let mut nodes: Vec<Node> = (0..n)
            .map(|i| Node {
                id: NodeId(i),
                chain: chain.clone(),
                peers: BTreeSet::new(),
                controlled_accounts: BTreeSet::from([AccountId(i as u64)]),
            })
            .collect();
        for e in &edges {
            nodes[e.0 .0].peers.insert(e.1);
            nodes[e.1 .0].peers.insert(e.0);
        }
        Ok(Self {
            nodes,
            edges,
            latency: BTreeMap::new(),
            severed: BTreeSet::new(),
            rules: Arc::new(rules),
            finality_depth: None,
            round: 0,
            in_flight: Vec::new(),
            injections: Vec::new(),
            stats: NetworkStats::default(),
            agreed: None,
        })
    }

    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        kind: TopologyKind,
        genesis: LedgerState,
        rules: Rules,
        rng: &mut R,
    ) -> Result<Self, ConsensusError> {
        let edges = kind.generate(n, rng);
        Self::new(n, edges, genesis, rules)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn stats(&self) -> NetworkStats {
        self.stats
    }

    pub fn latency(&self, edge: Edge) -> u32 {
        self.latency.get(&edge).copied().unwrap_or(1)
    }

    /// Sets every link's latency, in rounds (at least 1).
    pub fn set_uniform_latency(&mut self, rounds: u32) {
        let rounds = rounds.max(1);
        self.latency = self.edges.iter().map(|e| (*e, rounds)).collect();
    }

    /// Draws each link's latency uniformly from `min..=max` rounds.
    pub fn set_random_latency<R: Rng + ?Sized>(&mut self, min: u32, max: u32, rng: &mut R) {
        let min = min.max(1);
        let max = max.max(min);
        self.latency = self
            .edges
            .iter()
            .map(|e| (*e, rng.random_range(min..=max)))
            .collect();
    }

    pub fn set_latency(&mut self, edge: Edge, rounds: u32) {
        self.latency.insert(edge, rounds.max(1));
    }

    /// Refuse chains that rewrite any block `depth` or more below the head.
    pub fn set_finality_depth(&mut self, depth: Option<usize>) {
        self.finality_depth = depth;
    }

    /// Severs every link between different groups. Nodes not listed form
    /// one extra group.
    pub fn partition(&mut self, groups: &[BTreeSet<NodeId>]) {
        let mut label = vec![usize::MAX; self.nodes.len()];
        for (g, members) in groups.iter().enumerate() {
            for m in members {
                label[m.0] = g;
            }
        }
        self.severed = self
            .edges
            .iter()
            .filter(|e| label[e.0 .0] != label[e.1 .0])
            .copied()
            .collect();
    }

    /// Splits nodes into `0..n/2` and `n/2..n`.
    pub fn partition_halves(&mut self) -> [BTreeSet<NodeId>; 2] {
        let half = self.nodes.len() / 2;
        let a: BTreeSet<NodeId> = (0..half).map(NodeId).collect();
        let b: BTreeSet<NodeId> = (half..self.nodes.len()).map(NodeId).collect();
        self.partition(&[a.clone(), b.clone()]);
        [a, b]
    }

    pub fn heal(&mut self) {
        self.severed.clear();
    }

    pub fn is_partitioned(&self) -> bool {
        !self.severed.is_empty()
    }

    pub fn severed(&self) -> &BTreeSet<Edge> {
        &self.severed
    }

    /// Latency-weighted diameter of the full graph.
    pub fn diameter(&self) -> Option<u64> {
        let adj = latency_adjacency(self.nodes.len(), self.edges.iter().copied(), &self.latency);
        super::topology::weighted_diameter(self.nodes.len(), &adj)
    }

    /// Diameter counting only links that are not severed.
    pub fn effective_diameter(&self) -> Option<u64> {
        let live = self.edges.iter().copied().filter(|e| !self.severed.contains(e));
        let adj = latency_adjacency(self.nodes.len(), live, &self.latency);
        super::topology::weighted_diameter(self.nodes.len(), &adj)
    }

    pub fn is_connected(&self) -> bool {
        components(self.nodes.len(), &self.edges).iter().all(|&c| c == 0)
    }

    /// The highest-scoring chain held by any node.
    pub fn best_chain(&self) -> &Chain {
        let mut best = &self.nodes[0].chain;
        for n in &self.nodes[1..] {
            if compare_chains(&n.chain, best) == Ordering::Greater {
                best = &n.chain;
            }
        }
        best
    }

    /// Queues a block that overdraws an account, to be gossiped by `node`
    /// next round without being adopted by it.
    pub fn inject_invalid_block(&mut self, node: NodeId) {
        self.injections.push(node);
    }

    /// Sends an arbitrary chain from `from` to its live peers this round.
    pub fn broadcast(&mut self, from: NodeId, chain: Chain) {
        let due_base = self.round + 1;
        let peers: Vec<NodeId> = self.nodes[from.0].peers.iter().copied().collect();
        for peer in peers {
            let edge = Edge::new(from, peer);
            if self.severed.contains(&edge) {
                continue;
            }
            self.stats.messages_sent += 1;
            self.in_flight.push(Message {
                due: due_base + u64::from(self.latency(edge)) - 1,
                to: peer,
                chain: chain.clone(),
            });
        }
    }

    /// One round: mining, then gossip of every node's chain to its live
    /// peers, then delivery of every message due this round.
    pub fn step_round<R: Rng + ?Sized>(&mut self, policy: &MiningPolicy, rng: &mut R) {
        let round = self.round + 1;

        if policy.probability > 0.0 {
            for i in 0..self.nodes.len() {
                let eligible = policy
                    .miners
                    .as_ref()
                    .is_none_or(|m| m.contains(&NodeId(i)));
                if eligible && rng.random_bool(policy.probability.clamp(0.0, 1.0)) {
                    self.mine(i, policy, rng);
                }
            }
        }

        for node in std::mem::take(&mut self.injections) {
            let chain = self.craft_invalid(node);
            self.broadcast(node, chain);
        }

        for i in 0..self.nodes.len() {
            let chain = self.nodes[i].chain.clone();
            self.broadcast(NodeId(i), chain);
        }

        let (due, later): (Vec<Message>, Vec<Message>) =
            std::mem::take(&mut self.in_flight).into_iter().partition(|m| m.due <= round);
        self.in_flight = later;
        for msg in due {
            self.receive(msg);
        }

        self.round = round;
        let heads: BTreeSet<Digest> = self.nodes.iter().map(|n| n.chain.head_digest()).collect();
        self.agreed = match (heads.len(), self.agreed) {
            (1, Some((d, since))) if heads.contains(&d) => Some((d, since)),
            (1, _) => heads.first().map(|d| (*d, round)),
            _ => None,
        };
    }

    fn mine<R: Rng + ?Sized>(&mut self, i: usize, policy: &MiningPolicy, rng: &mut R) {
        let n = self.nodes.len();
        let node = &self.nodes[i];
        let state = node.chain.state();
        let senders: Vec<AccountId> = node.controlled_accounts.iter().copied().collect();
        let receivers: Vec<AccountId> = (0..n as u64).map(AccountId).collect();
        let txs = random_transfers(state, &senders, &receivers, policy.sends_per_block, rng);
        let height = node.chain.height() + 1;
        let mu = self.rules.schedule.as_ref().map_or(0, |s| s.mu(height));
        let reward = if mu > 0 {
            RewardEvent::to_miner(mu, node.miner_account())
        } else {
            RewardEvent::none()
        };
        let work = policy.work.draw(rng);
        let rules = Arc::clone(&self.rules);
        let node = &mut self.nodes[i];
        if node.chain.extend(txs, reward, work, &rules).is_ok() {
            self.stats.blocks_mined += 1;
        }
    }

    fn craft_invalid(&self, node: NodeId) -> Chain {
        let n = &self.nodes[node.0];
        let parent = n.chain.head();
        let from = n.miner_account();
        let to = AccountId(((node.0 + 1) % self.nodes.len()) as u64);
        let overdraft = parent.state.balance(from).unwrap_or(0).max(0) as u64 + 1;
        let tx = Transaction::transfer(from, to, overdraft);
        let mut state = parent.state.clone().with_height(parent.height() + 1);
        for d in &tx.deltas {
            state.apply_delta_unchecked(&StateDelta { ..d.clone() });
        }
        let mu = self.rules.schedule.as_ref().map_or(0, |s| s.mu(parent.height() + 1));
        let block = Block {
            state,
            txs: TransactionBlock::new(
                parent.height() + 1,
                vec![tx],
                if mu > 0 {
                    RewardEvent::to_miner(mu, from)
                } else {
                    RewardEvent::none()
                },
            ),
            parent_link: parent.digest(),
            work: 1.0e6,
        };
        let mut chain = n.chain.clone();
        chain.push_unchecked(block);
        chain
    }

    fn receive(&mut self, msg: Message) {
        let node = &self.nodes[msg.to.0];
        if compare_chains(&msg.chain, &node.chain) != Ordering::Greater {
            return;
        }
        if !Arc::ptr_eq(&msg.chain.blocks()[0], &node.chain.blocks()[0])
            && msg.chain.genesis_block() != node.chain.genesis_block()
        {
            self.stats.dropped_invalid += 1;
            return;
        }
        let fork = node.chain.divergence(&msg.chain);
        if let Some(depth) = self.finality_depth {
            if fork < node.chain.len().saturating_sub(depth) {
                self.stats.rejected_final += 1;
                return;
            }
        }
        match replay_suffix(&msg.chain, fork, &self.rules) {
            Ok(_) => {
                self.nodes[msg.to.0].chain = msg.chain;
                self.stats.adoptions += 1;
            }
            Err(_) => self.stats.dropped_invalid += 1,
        }
    }

    pub fn convergence_report(&self) -> ConvergenceReport {
        let mut counts: BTreeMap<Digest, usize> = BTreeMap::new();
        for n in &self.nodes {
            *counts.entry(n.chain.head_digest()).or_insert(0) += 1;
        }
        let mut histogram: Vec<(Digest, usize)> = counts.into_iter().collect();
        histogram.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let top = histogram.first().map_or(0, |h| h.1);
        ConvergenceReport {
            round: self.round,
            agreement: top as f64 / self.nodes.len() as f64,
            converged_since: match (histogram.len(), self.agreed) {
                (1, Some((d, since))) if d == histogram[0].0 => Some(since),
                (1, _) => Some(self.round),
                _ => None,
            },
            histogram: histogram.into_iter().map(|(d, c)| (d.to_hex(), c)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::replay_chain;
    use crate::reward::RewardSchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(n: usize, kind: TopologyKind) -> NetworkTopology {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        NetworkTopology::generate(
            n,
            kind,
            LedgerState::genesis(),
            Rules::with_schedule(RewardSchedule::bitcoin()),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn one_round_floods_a_complete_graph() {
        let mut net = net(6, TopologyKind::Complete);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        net.step_round(&MiningPolicy::single(NodeId(2)), &mut rng);
        let report = net.convergence_report();
        assert_eq!(report.agreement, 1.0);
        assert_eq!(net.nodes()[0].chain.height(), 1);
        assert_eq!(report.converged_since, Some(1));
    }

    #[test]
    fn fresh_fork_splits_two_nodes() {
        let mut net = net(2, TopologyKind::Complete);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        net.partition_halves();
        let policy = MiningPolicy {
            probability: 1.0,
            ..MiningPolicy::default()
        };
        net.step_round(&policy, &mut rng);
        let report = net.convergence_report();
        assert_eq!(report.agreement, 0.5);
        assert_eq!(report.histogram.len(), 2);
        assert_eq!(report.converged_since, None);
    }

    #[test]
    fn identical_chains_agree() {
        let net = net(4, TopologyKind::Ring);
        let report = net.convergence_report();
        assert_eq!(report.agreement, 1.0);
    }

    #[test]
    fn invalid_block_is_dropped_by_everyone() {
        let mut net = net(5, TopologyKind::Complete);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        net.step_round(&MiningPolicy::single(NodeId(0)), &mut rng);
        let before: Vec<u64> = net.nodes().iter().map(|n| n.chain.height()).collect();
        net.inject_invalid_block(NodeId(0));
        net.step_round(&MiningPolicy::idle(), &mut rng);
        let after: Vec<u64> = net.nodes().iter().map(|n| n.chain.height()).collect();
        assert_eq!(before, after);
        assert_eq!(net.stats().dropped_invalid, 4);
        for n in net.nodes() {
            assert!(replay_chain(&n.chain, net.rules()).is_ok());
        }
    }

    #[test]
    fn ring_needs_diameter_rounds() {
        let mut net = net(8, TopologyKind::Ring);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        net.step_round(&MiningPolicy::single(NodeId(0)), &mut rng);
        // The block reaches nodes 1 and 7 in the round it is mined.
        let heights: Vec<u64> = net.nodes().iter().map(|n| n.chain.height()).collect();
        assert_eq!(heights, vec![1, 1, 0, 0, 0, 0, 0, 1]);
        for _ in 0..3 {
            net.step_round(&MiningPolicy::idle(), &mut rng);
        }
        assert_eq!(net.diameter(), Some(4));
        assert_eq!(net.convergence_report().agreement, 1.0);
        assert_eq!(net.convergence_report().converged_since, Some(4));
    }

    #[test]
    fn latency_delays_delivery() {
        let mut net = net(2, TopologyKind::Complete);
        net.set_uniform_latency(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        net.step_round(&MiningPolicy::single(NodeId(0)), &mut rng);
        net.step_round(&MiningPolicy::idle(), &mut rng);
        assert_eq!(net.node(NodeId(1)).chain.height(), 0);
        net.step_round(&MiningPolicy::idle(), &mut rng);
        assert_eq!(net.node(NodeId(1)).chain.height(), 1);
    }

    #[test]
    fn finality_blocks_deep_reorgs() {
        let mut net = net(2, TopologyKind::Complete);
        net.set_finality_depth(Some(1));
        net.partition_halves();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            net.step_round(&MiningPolicy::single(NodeId(0)), &mut rng);
        }
        for _ in 0..2 {
            net.step_round(&MiningPolicy::single(NodeId(1)), &mut rng);
        }
        net.heal();
        net.step_round(&MiningPolicy::idle(), &mut rng);
        // Node 1 would have to discard its finalized block to follow node 0.
        assert_eq!(net.node(NodeId(1)).chain.height(), 2);
        assert_eq!(net.node(NodeId(0)).chain.height(), 3);
        assert!(net.stats().rejected_final > 0);
    }
}
