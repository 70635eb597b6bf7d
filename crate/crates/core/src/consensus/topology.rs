use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::NodeId;

/// An undirected link, stored with the smaller endpoint first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(pub NodeId, pub NodeId);

impl Edge {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if self.0 == n {
            self.1
        } else {
            self.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologyKind {
    Complete,
    Ring,
    /// Erdős–Rényi `G(n, p)`, patched to be connected.
    Random { edge_probability: f64 },
}

impl TopologyKind {
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> BTreeSet<Edge> {
        let mut edges = BTreeSet::new();
        match *self {
            TopologyKind::Complete => {
                for a in 0..n {
                    for b in a + 1..n {
                        edges.insert(Edge(NodeId(a), NodeId(b)));
                    }
                }
            }
            TopologyKind::Ring => {
                if n >= 2 {
                    for a in 0..n {
                        edges.insert(Edge::new(NodeId(a), NodeId((a + 1) % n)));
                    }
                }
            }
            TopologyKind::Random { edge_probability } => {
                for a in 0..n {
                    for b in a + 1..n {
                        if rng.random_bool(edge_probability.clamp(0.0, 1.0)) {
                            edges.insert(Edge(NodeId(a), NodeId(b)));
                        }
                    }
                }
                connect_components(n, &mut edges);
            }
        }
        edges
    }
}

/// Component label of every node (the smallest node id in its component).
pub(crate) fn components(n: usize, edges: &BTreeSet<Edge>) -> Vec<usize> {
    let adj = adjacency(n, edges.iter());
    let mut label = vec![usize::MAX; n];
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = start;
                    queue.push_back(v);
                }
            }
        }
    }
    label
}

/// Links consecutive components through their smallest nodes.
fn connect_components(n: usize, edges: &mut BTreeSet<Edge>) {
    let label = components(n, edges);
    let roots: BTreeSet<usize> = label.into_iter().collect();
    let roots: Vec<usize> = roots.into_iter().collect();
    for w in roots.windows(2) {
        edges.insert(Edge::new(NodeId(w[0]), NodeId(w[1])));
    }
}

pub(crate) fn adjacency<'a>(n: usize, edges: impl Iterator<Item = &'a Edge>) -> Vec<Vec<(usize, u64)>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.0 .0].push((e.1 .0, 1));
        adj[e.1 .0].push((e.0 .0, 1));
    }
    adj
}

/// Longest shortest path, with edge weights; `None` when disconnected.
pub(crate) fn weighted_diameter(n: usize, adj: &[Vec<(usize, u64)>]) -> Option<u64> {
    let mut diameter = 0;
    for src in 0..n {
        let mut dist = vec![u64::MAX; n];
        dist[src] = 0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(std::cmp::Reverse((0u64, src)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(std::cmp::Reverse((nd, v)));
                }
            }
        }
        let far = *dist.iter().max().unwrap_or(&0);
        if far == u64::MAX {
            return None;
        }
        diameter = diameter.max(far);
    }
    Some(diameter)
}

pub(crate) fn latency_adjacency(
    n: usize,
    edges: impl Iterator<Item = Edge>,
    latency: &BTreeMap<Edge, u32>,
) -> Vec<Vec<(usize, u64)>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        let w = u64::from(latency.get(&e).copied().unwrap_or(1));
        adj[e.0 .0].push((e.1 .0, w));
        adj[e.1 .0].push((e.0 .0, w));
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn complete_and_ring_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(TopologyKind::Complete.generate(5, &mut rng).len(), 10);
        assert_eq!(TopologyKind::Ring.generate(5, &mut rng).len(), 5);
        assert_eq!(TopologyKind::Ring.generate(2, &mut rng).len(), 1);
    }

    #[test]
    fn sparse_random_graph_is_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let edges = TopologyKind::Random {
            edge_probability: 0.01,
        }
        .generate(40, &mut rng);
        assert!(components(40, &edges).iter().all(|&c| c == 0));
    }

    #[test]
    fn ring_diameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let edges = TopologyKind::Ring.generate(8, &mut rng);
        assert_eq!(weighted_diameter(8, &adjacency(8, edges.iter())), Some(4));
    }
}
