//! Static influence layer: who can influence whose behaviour.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("population needs at least 2 agents (got {0})")]
    TooSmall(usize),
    #[error("node {0} has no out-neighbours; its payoffs and switch rates are undefined")]
    NoNeighbours(usize),
    #[error("node {node} lists neighbour {neighbour}, outside [0, {n})")]
    OutOfRange { node: usize, neighbour: usize, n: usize },
    #[error("node {node} lists neighbour {neighbour} twice")]
    Duplicate { node: usize, neighbour: usize },
    #[error("ring half-degree {k} must be in [1, n/2] with n = {n}")]
    BadRingDegree { n: usize, k: usize },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawGraph {
    Complete { n: usize },
    Ring { n: usize, k: usize },
    Adjacency { neighbours: Vec<Vec<usize>> },
}

/// Influence graph with out-neighbour sets `N_i` (node `j` in `N_i` influences `i`).
///
/// `Complete` is kept implicit: every node's neighbourhood is the whole
/// population, the node itself included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawGraph")]
pub enum InfluenceGraph {
    Complete { n: usize },
    Adjacency { neighbours: Vec<Vec<usize>> },
}

impl TryFrom<RawGraph> for InfluenceGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        match raw {
            RawGraph::Complete { n } => Self::complete(n),
            RawGraph::Ring { n, k } => Self::ring(n, k),
            RawGraph::Adjacency { neighbours } => Self::from_adjacency(neighbours),
        }
    }
}

impl InfluenceGraph {
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        Ok(Self::Complete { n })
    }

    pub fn from_adjacency(neighbours: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        let n = neighbours.len();
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        let mut seen = vec![usize::MAX; n];
        for (node, list) in neighbours.iter().enumerate() {
            if list.is_empty() {
                return Err(GraphError::NoNeighbours(node));
            }
            for &neighbour in list {
                if neighbour >= n {
                    return Err(GraphError::OutOfRange { node, neighbour, n });
                }
                if seen[neighbour] == node {
                    return Err(GraphError::Duplicate { node, neighbour });
                }
                seen[neighbour] = node;
            }
        }
        Ok(Self::Adjacency { neighbours })
    }

    /// Undirected ring where each node is influenced by its `k` nearest
    /// successors and predecessors (no self-loop).
    pub fn ring(n: usize, k: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        if k == 0 || k > n / 2 {
            return Err(GraphError::BadRingDegree { n, k });
        }
        let lists = (0..n)
            .map(|i| {
                let mut l: Vec<usize> = (1..=k).flat_map(|o| [(i + o) % n, (i + n - o) % n]).collect();
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        Self::from_adjacency(lists)
    }

    /// Star on `n` nodes: the hub 0 is influenced by every leaf and every
    /// leaf by the hub only.
    pub fn star(n: usize) -> Result<Self, GraphError> {
        let mut lists = vec![(1..n).collect::<Vec<_>>()];
        lists.extend((1..n).map(|_| vec![0]));
        Self::from_adjacency(lists)
    }

    /// Same neighbourhoods as `Complete`, stored explicitly.
    pub fn complete_explicit(n: usize) -> Result<Self, GraphError> {
        Self::from_adjacency((0..n).map(|_| (0..n).collect()).collect())
    }

    pub fn order(&self) -> usize {
        match self {
            Self::Complete { n } => *n,
            Self::Adjacency { neighbours } => neighbours.len(),
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        match self {
            Self::Complete { n } => *n,
            Self::Adjacency { neighbours } => neighbours[i].len(),
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Self::Complete { .. })
    }

    pub fn neighbours(&self, i: usize) -> Neighbours<'_> {
        match self {
            Self::Complete { n } => Neighbours::Range(0..*n),
            Self::Adjacency { neighbours } => Neighbours::List(neighbours[i].iter()),
        }
    }

    /// In-neighbour lists: `in[j]` holds every `i` with `j` in `N_i`.
    pub fn reverse(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut rev = vec![Vec::new(); n];
        for i in 0..n {
            for j in self.neighbours(i) {
                rev[j].push(i);
            }
        }
        rev
    }
}

pub enum Neighbours<'a> {
    Range(std::ops::Range<usize>),
    List(std::slice::Iter<'a, usize>),
}

impl Iterator for Neighbours<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbours::Range(r) => r.next(),
            Neighbours::List(it) => it.next().copied(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_graphs() {
        assert_eq!(InfluenceGraph::complete(1), Err(GraphError::TooSmall(1)));
        assert_eq!(InfluenceGraph::from_adjacency(vec![vec![1], vec![]]), Err(GraphError::NoNeighbours(1)));
        assert!(matches!(
            InfluenceGraph::from_adjacency(vec![vec![2], vec![0]]),
            Err(GraphError::OutOfRange { node: 0, neighbour: 2, n: 2 })
        ));
        assert!(matches!(InfluenceGraph::from_adjacency(vec![vec![1, 1], vec![0]]), Err(GraphError::Duplicate { .. })));
    }

    #[test]
    fn complete_graph_includes_self() {
        let g = InfluenceGraph::complete(4).unwrap();
        assert_eq!(g.degree(2), 4);
        assert_eq!(g.neighbours(2).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn ring_and_star_shapes() {
        let g = InfluenceGraph::ring(6, 1).unwrap();
        assert_eq!(g.neighbours(0).collect::<Vec<_>>(), vec![1, 5]);
        let s = InfluenceGraph::star(3).unwrap();
        assert_eq!(s.neighbours(0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(s.degree(2), 1);
        let rev = s.reverse();
        assert_eq!(rev[0], vec![1, 2]);
        assert_eq!(rev[1], vec![0]);
    }

    #[test]
    fn json_forms() {
        let g: InfluenceGraph = serde_json::from_str(r#"{"kind":"ring","n":5,"k":2}"#).unwrap();
        assert_eq!(g.degree(0), 4);
        let c: InfluenceGraph = serde_json::from_str(r#"{"kind":"complete","n":10}"#).unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"kind":"complete","n":10}"#);
        assert!(serde_json::from_str::<InfluenceGraph>(r#"{"kind":"complete","n":1}"#).is_err());
    }
}
