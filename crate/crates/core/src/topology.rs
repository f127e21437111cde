//! Connectivity graphs and data-gathering trees.
//!
//! Each round the engine snapshots node positions, builds the connectivity
//! graph (an edge exists iff the Euclidean distance is at most the
//! transmission range), derives a spanning tree -- minimum total distance
//! (MST) or maximum total link expiration time (LET) -- and roots it at the
//! sink with a BFS to obtain the directed data-gathering tree.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::mobility::Point;

/// Undirected connectivity graph with per-edge distance and LET weights.
#[derive(Debug, Clone)]
pub struct ConnectivityGraph {
    pub num_nodes: usize,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, Copy)]
pub struct GraphEdge {
    /// Smaller endpoint id.
    pub a: usize,
    /// Larger endpoint id.
    pub b: usize,
    /// Euclidean distance in meters.
    pub distance: f64,
    /// Predicted link expiration time in seconds; `f64::INFINITY` when the
    /// relative velocity is zero.
    pub let_secs: f64,
}

/// An undirected spanning tree: exactly `n - 1` edges over `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTree {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Rooted directed data-gathering tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DGTree {
    pub root: usize,
    /// `parent[v]` is `None` exactly for the root.
    pub parent: Vec<Option<usize>>,
    /// Children in ascending id order.
    pub children: Vec<Vec<usize>>,
    /// Hop count from the root; `level[root] == 0`.
    pub level: Vec<usize>,
    /// Round at which this tree was built.
    pub build_round: u32,
}

impl DGTree {
    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Undirected parent-child edges of the tree.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|p| (p, v)))
    }
}

/// Build the connectivity graph from a position snapshot.
///
/// The boundary case `distance == trans_range` is an edge. Edges are
/// inserted in lexicographic `(a, b)` order, which downstream tie-breaking
/// relies on.
pub fn build_graph(positions: &[Point], trans_range: f64, velocities: &[(f64, f64)]) -> ConnectivityGraph {
    let n = positions.len();
    debug_assert_eq!(n, velocities.len());
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let distance = positions[a].distance(&positions[b]);
            if distance <= trans_range {
                let let_secs = let_weight(
                    positions[a],
                    positions[b],
                    velocities[a],
                    velocities[b],
                    trans_range,
                );
                edges.push(GraphEdge {
                    a,
                    b,
                    distance,
                    let_secs,
                });
            }
        }
    }
    ConnectivityGraph {
        num_nodes: n,
        edges,
    }
}

/// Predicted time until two nodes in range drift out of range, assuming both
/// keep their current straight-line velocities.
///
/// With relative velocity `(a, c)` and relative position `(b, d)` the
/// distance exceeds `r` first at
/// `(-(ab + cd) + sqrt((a^2 + c^2) r^2 - (ad - bc)^2)) / (a^2 + c^2)`;
/// the result is `+inf` when the relative velocity is zero.
pub fn let_weight(
    pos_a: Point,
    pos_b: Point,
    vel_a: (f64, f64),
    vel_b: (f64, f64),
    trans_range: f64,
) -> f64 {
    let a = vel_a.0 - vel_b.0;
    let c = vel_a.1 - vel_b.1;
    let b = pos_a.x - pos_b.x;
    let d = pos_a.y - pos_b.y;
    let v2 = a * a + c * c;
    if v2 <= 0.0 {
        return f64::INFINITY;
    }
    let cross = a * d - b * c;
    // Nonnegative whenever the nodes start within range; clamp rounding.
    let disc = (v2 * trans_range * trans_range - cross * cross).max(0.0);
    (-(a * b + c * d) + libm::sqrt(disc)) / v2
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, x: usize, y: usize) -> bool {
        let rx = self.find(x);
        let ry = self.find(y);
        if rx == ry {
            return false;
        }
        self.parent[rx.max(ry)] = rx.min(ry);
        true
    }
}

/// Kruskal over edges pre-sorted by the caller-provided key.
fn kruskal(num_nodes: usize, mut order: Vec<(f64, usize, usize)>) -> Option<SpanningTree> {
    // Ties broken by the lexicographically smaller (min_id, max_id) pair.
    order.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut uf = UnionFind::new(num_nodes);
    let mut edges = Vec::with_capacity(num_nodes.saturating_sub(1));
    for (_, a, b) in order {
        if uf.union(a, b) {
            edges.push((a, b));
            if edges.len() + 1 == num_nodes {
                break;
            }
        }
    }
    if edges.len() + 1 == num_nodes {
        Some(SpanningTree { num_nodes, edges })
    } else {
        None
    }
}

/// Minimum total Euclidean distance spanning tree, or `None` when the graph
/// is disconnected.
pub fn mst_tree(graph: &ConnectivityGraph) -> Option<SpanningTree> {
    kruskal(
        graph.num_nodes,
        graph
            .edges
            .iter()
            .map(|e| (e.distance, e.a, e.b))
            .collect(),
    )
}

/// Maximum total link expiration time spanning tree, or `None` when the
/// graph is disconnected. Infinite-LET edges sort first.
pub fn let_tree(graph: &ConnectivityGraph) -> Option<SpanningTree> {
    kruskal(
        graph.num_nodes,
        graph
            .edges
            .iter()
            .map(|e| (-e.let_secs, e.a, e.b))
            .collect(),
    )
}

/// Root a spanning tree at the sink by BFS, assigning parents, children and
/// levels. Children are visited in ascending id order.
pub fn root_tree(tree: &SpanningTree, sink: usize, build_round: u32) -> DGTree {
    let n = tree.num_nodes;
    let mut adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for &(a, b) in &tree.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }

    let mut parent = alloc::vec![None; n];
    let mut children: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let mut level = alloc::vec![0usize; n];
    let mut visited = alloc::vec![false; n];
    let mut queue = VecDeque::new();
    visited[sink] = true;
    queue.push_back(sink);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                parent[v] = Some(u);
                children[u].push(v);
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    debug_assert!(visited.iter().all(|&v| v), "spanning tree must be connected");

    DGTree {
        root: sink,
        parent,
        children,
        level,
        build_round,
    }
}

/// True iff every parent-child pair is still within transmission range.
pub fn tree_alive(tree: &DGTree, positions: &[Point], trans_range: f64) -> bool {
    tree.edges()
        .all(|(p, c)| positions[p].distance(&positions[c]) <= trans_range)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_graph(points: &[(f64, f64)], range: f64) -> ConnectivityGraph {
        let positions: Vec<Point> = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let velocities = vec![(0.0, 0.0); points.len()];
        build_graph(&positions, range, &velocities)
    }

    #[test]
    fn boundary_distance_is_edge() {
        let g = static_graph(&[(0.0, 0.0), (25.0, 0.0)], 25.0);
        assert_eq!(g.edges.len(), 1);
        let g = static_graph(&[(0.0, 0.0), (25.000001, 0.0)], 25.0);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn let_one_dimensional_closure() {
        // b moves away along x at 1 m/s starting 20 m away; leaves range 25
        // after (25 - 20) / 1 = 5 s.
        let t = let_weight(
            Point::new(0.0, 0.0),
            Point::new(20.0, 0.0),
            (0.0, 0.0),
            (1.0, 0.0),
            25.0,
        );
        assert!((t - 5.0).abs() < 1e-9, "LET = {t}");
    }

    #[test]
    fn let_identical_velocities_is_infinite() {
        let t = let_weight(
            Point::new(1.0, 2.0),
            Point::new(3.0, 4.0),
            (2.5, -1.0),
            (2.5, -1.0),
            25.0,
        );
        assert!(t.is_infinite());
    }

    #[test]
    fn mst_path_graph_unique() {
        // Only edges (0,1) and (1,2) exist: the spanning tree is forced.
        let g = static_graph(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], 12.0);
        let t = mst_tree(&g).unwrap();
        assert_eq!(t.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn mst_disconnected_reports_none() {
        let g = static_graph(&[(0.0, 0.0), (10.0, 0.0), (90.0, 90.0), (99.0, 90.0)], 12.0);
        assert!(mst_tree(&g).is_none());
        assert!(let_tree(&g).is_none());
    }

    #[test]
    fn let_tree_drops_minimum_let_cycle_edge() {
        // Triangle where node 2 departs radially from node 0 (LET 4.23 s) but
        // tangentially from node 1 (LET 5.65 s); edge (0,1) never expires.
        let positions = [
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(5.0, 5.0),
        ];
        let velocities = [(0.0, 0.0), (0.0, 0.0), (3.0, 3.0)];
        let g = build_graph(&positions, 25.0, &velocities);
        assert_eq!(g.edges.len(), 3);
        let t = let_tree(&g).unwrap();
        assert!(t.edges.contains(&(0, 1)));
        assert!(t.edges.contains(&(1, 2)));
        assert!(!t.edges.contains(&(0, 2)));
    }

    #[test]
    fn all_infinite_lets_tie_broken_deterministically() {
        let g = static_graph(&[(0.0, 0.0), (5.0, 0.0), (0.0, 5.0), (5.0, 5.0)], 25.0);
        assert!(g.edges.iter().all(|e| e.let_secs.is_infinite()));
        let t1 = let_tree(&g).unwrap();
        let t2 = let_tree(&g).unwrap();
        assert_eq!(t1, t2);
        // Lexicographic tie-breaking picks the first three id pairs.
        assert_eq!(t1.edges, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn root_tree_star_and_path() {
        let star = SpanningTree {
            num_nodes: 4,
            edges: vec![(0, 1), (0, 2), (0, 3)],
        };
        let dg = root_tree(&star, 0, 0);
        assert_eq!(dg.level, vec![0, 1, 1, 1]);
        assert!(dg.is_leaf(1) && dg.is_leaf(2) && dg.is_leaf(3));

        let path = SpanningTree {
            num_nodes: 3,
            edges: vec![(0, 1), (1, 2)],
        };
        let dg = root_tree(&path, 0, 0);
        assert_eq!(dg.level, vec![0, 1, 2]);
        assert_eq!(dg.parent, vec![None, Some(0), Some(1)]);
        assert!(!dg.is_leaf(1));
        assert!(dg.is_leaf(2));
    }

    #[test]
    fn tree_alive_detects_single_broken_edge() {
        let mut positions = vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(20.0, 0.0),
        ];
        let g = build_graph(&positions, 12.0, &[(0.0, 0.0); 3]);
        let dg = root_tree(&mst_tree(&g).unwrap(), 0, 0);
        assert!(tree_alive(&dg, &positions, 12.0));
        positions[2] = Point::new(30.0, 0.0);
        assert!(!tree_alive(&dg, &positions, 12.0));
    }
}
