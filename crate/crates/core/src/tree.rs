//! Search tree with RRT*-style parent selection and rewiring.
//!
//! Nodes carry a layer index so a single tree can span several manifolds:
//! an edge may stay within a layer or enter the next one at an entry node.

use crate::manifold::Configuration;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parent {
    /// The start configuration.
    Root,
    /// A seed copied from a node of an earlier tree; the id refers to that
    /// tree.
    Seed(NodeId),
    Node(NodeId),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub config: Configuration,
    pub parent: Parent,
    pub cost: f64,
    pub layer: usize,
    pub entry: bool,
    children: Vec<NodeId>,
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        &self.children
    }
}

#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
    terminal_layer: usize,
    considered: Option<Vec<(NodeId, NodeId)>>,
}

/// Parameters of one extension.
#[derive(Clone, Copy, Debug)]
pub struct ExtendParams {
    pub gamma: f64,
    pub alpha: f64,
    pub layer: usize,
    pub entry: bool,
}

impl Tree {
    /// Tree rooted at the start configuration. Nodes in `terminal_layer`
    /// never become parents or nearest neighbours.
    pub fn with_root(start: Configuration, terminal_layer: usize) -> Self {
        let mut t = Tree::empty(terminal_layer);
        t.push(start, Parent::Root, 0.0, 0, false);
        t
    }

    pub fn empty(terminal_layer: usize) -> Self {
        Tree {
            nodes: Vec::new(),
            terminal_layer,
            considered: None,
        }
    }

    /// Start recording every collision-checked edge that passed.
    pub fn record_considered_edges(&mut self) {
        self.considered.get_or_insert_with(Vec::new);
    }

    pub fn considered_edges(&self) -> Option<&[(NodeId, NodeId)]> {
        self.considered.as_deref()
    }

    /// Seed a node that continues from node `origin` of a previous tree.
    pub fn add_seed(&mut self, config: Configuration, cost: f64, origin: NodeId) -> NodeId {
        self.push(config, Parent::Seed(origin), cost, 0, false)
    }

    fn push(&mut self, config: Configuration, parent: Parent, cost: f64, layer: usize, entry: bool) -> NodeId {
        let id = self.nodes.len();
        if let Parent::Node(p) = parent {
            self.nodes[p].children.push(id);
        }
        self.nodes.push(Node {
            config,
            parent,
            cost,
            layer,
            entry,
            children: Vec::new(),
        });
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn terminal_layer(&self) -> usize {
        self.terminal_layer
    }

    fn can_parent(&self, p: &Node) -> bool {
        p.layer < self.terminal_layer
    }

    /// Whether `p -> c` is a permitted edge given layers.
    fn edge_allowed(&self, p: &Node, c_layer: usize, c_entry: bool) -> bool {
        self.can_parent(p) && (c_layer == p.layer || (c_layer == p.layer + 1 && c_entry))
    }

    /// Closest non-terminal node; ties go to the lowest id.
    ///
    /// # Panics
    /// If the tree has no non-terminal node.
    pub fn nearest(&self, q: &Configuration) -> NodeId {
        let mut best: Option<(NodeId, f64)> = None;
        for (id, n) in self.nodes.iter().enumerate() {
            if !self.can_parent(n) {
                continue;
            }
            let d = n.config.distance(q);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((id, d));
            }
        }
        best.expect("nearest on a tree without eligible nodes").0
    }

    /// All nodes strictly closer than `radius`, in id order.
    pub fn near(&self, q: &Configuration, radius: f64) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.config.distance(q) < radius)
            .map(|(id, _)| id)
            .collect()
    }

    /// `min(gamma (ln|V| / |V|)^(1/k), alpha)` for the current node count.
    pub fn near_radius(&self, gamma: f64, alpha: f64, dim: usize) -> f64 {
        let v = self.nodes.len() as f64;
        if v < 1.0 {
            return 0.0;
        }
        (gamma * (v.ln() / v).powf(1.0 / dim as f64)).min(alpha)
    }

    fn log(&mut self, a: NodeId, b: NodeId) {
        if let Some(c) = self.considered.as_mut() {
            c.push((a, b));
        }
    }

    /// Insert `q_new` reached from `q_near` with the cheapest admissible
    /// parent in its neighbourhood, then rewire neighbours through it.
    ///
    /// `edge_free(a, b, layer)` checks the straight edge `a -> b` in the free
    /// space of `layer` (the parent's layer). Returns the new id, or `None`
    /// if the edge from `q_near` is blocked or not admissible.
    pub fn rrt_star_extend<F>(
        &mut self,
        q_near: NodeId,
        q_new: Configuration,
        params: &ExtendParams,
        mut edge_free: F,
    ) -> Option<NodeId>
    where
        F: FnMut(&Configuration, &Configuration, usize) -> bool,
    {
        let near_node = &self.nodes[q_near];
        if !self.edge_allowed(near_node, params.layer, params.entry) {
            return None;
        }
        if !edge_free(&near_node.config, &q_new, near_node.layer) {
            return None;
        }
        let radius = self.near_radius(params.gamma, params.alpha, q_new.dim());
        let neighbours = self.near(&q_new, radius);

        let mut best = q_near;
        let mut best_cost = near_node.cost + near_node.config.distance(&q_new);
        let mut checked = vec![q_near];
        for &id in &neighbours {
            if id == q_near {
                continue;
            }
            let n = &self.nodes[id];
            if !self.edge_allowed(n, params.layer, params.entry) {
                continue;
            }
            let c = n.cost + n.config.distance(&q_new);
            if c < best_cost && edge_free(&n.config, &q_new, n.layer) {
                checked.push(id);
                best = id;
                best_cost = c;
            }
        }

        let new_id = self.push(q_new, Parent::Node(best), best_cost, params.layer, params.entry);
        for p in checked {
            self.log(p, new_id);
        }

        for &id in &neighbours {
            if id == best {
                continue;
            }
            let (new_node, n) = (&self.nodes[new_id], &self.nodes[id]);
            if !self.edge_allowed(new_node, n.layer, n.entry) {
                continue;
            }
            let c = new_node.cost + new_node.config.distance(&n.config);
            if c < n.cost && edge_free(&new_node.config, &n.config, new_node.layer) {
                self.log(new_id, id);
                self.reparent(id, new_id);
            }
        }
        Some(new_id)
    }

    fn reparent(&mut self, child: NodeId, parent: NodeId) {
        if let Parent::Node(old) = self.nodes[child].parent {
            self.nodes[old].children.retain(|&c| c != child);
        }
        self.nodes[child].parent = Parent::Node(parent);
        self.nodes[parent].children.push(child);
        let mut stack = vec![child];
        while let Some(id) = stack.pop() {
            let Parent::Node(p) = self.nodes[id].parent else { unreachable!() };
            self.nodes[id].cost = self.nodes[p].cost + self.nodes[p].config.distance(&self.nodes[id].config);
            stack.extend(self.nodes[id].children.iter().copied());
        }
    }

    /// Node ids from the tree root (or seed) down to `id`, and the seed's
    /// origin if the walk ended at a seed.
    pub fn branch(&self, id: NodeId) -> (Vec<NodeId>, Option<NodeId>) {
        let mut ids = vec![id];
        let mut cur = id;
        loop {
            match self.nodes[cur].parent {
                Parent::Node(p) => {
                    ids.push(p);
                    cur = p;
                }
                Parent::Root => {
                    ids.reverse();
                    return (ids, None);
                }
                Parent::Seed(origin) => {
                    ids.reverse();
                    return (ids, Some(origin));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, proptest};
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    fn cfg(v: &[f64]) -> Configuration {
        Configuration::from_slice(v)
    }

    fn flat(gamma: f64, alpha: f64) -> ExtendParams {
        ExtendParams {
            gamma,
            alpha,
            layer: 0,
            entry: false,
        }
    }

    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }

    fn dijkstra(tree: &Tree, edges: &[(NodeId, NodeId)]) -> Vec<f64> {
        let n = tree.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
        }
        let mut dist = vec![f64::INFINITY; n];
        dist[0] = 0.0;
        let mut heap = BinaryHeap::from([Item(0.0, 0)]);
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &v in &adj[u] {
                let nd = d + tree.node(u).config.distance(&tree.node(v).config);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        dist
    }

    fn tree_edges(tree: &Tree) -> Vec<(NodeId, NodeId)> {
        (0..tree.len())
            .filter_map(|i| match tree.node(i).parent {
                Parent::Node(p) => Some((p, i)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn nearest_breaks_ties_by_id() {
        let mut t = Tree::with_root(cfg(&[0.0, 0.0]), usize::MAX);
        t.rrt_star_extend(0, cfg(&[1.0, 1.0]), &flat(0.0, 1.0), |_, _, _| true);
        t.rrt_star_extend(0, cfg(&[1.0, -1.0]), &flat(0.0, 1.0), |_, _, _| true);
        assert_eq!(t.nearest(&cfg(&[2.0, 0.0])), 1);
    }

    #[test]
    fn near_is_strict() {
        let t = Tree::with_root(cfg(&[0.0, 0.0]), usize::MAX);
        assert!(t.near(&cfg(&[1.0, 0.0]), 1.0).is_empty());
        assert_eq!(t.near(&cfg(&[1.0, 0.0]), 1.0 + 1e-12), vec![0]);
    }

    #[test]
    fn single_node_radius_is_zero() {
        let t = Tree::with_root(cfg(&[0.0, 0.0]), usize::MAX);
        assert_eq!(t.near_radius(10.0, 1.0, 2), 0.0);
    }

    #[test]
    fn blocked_edge_is_rejected() {
        let mut t = Tree::with_root(cfg(&[0.0]), usize::MAX);
        assert!(t.rrt_star_extend(0, cfg(&[1.0]), &flat(1.0, 1.0), |_, _, _| false).is_none());
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn diamond_rewire_matches_dijkstra() {
        // root, then two sides of a square; the far corner should attach to
        // whichever side is cheaper, and a detour node is rewired.
        let mut t = Tree::with_root(cfg(&[0.0, 0.0]), usize::MAX);
        t.record_considered_edges();
        let p = flat(100.0, 10.0);
        let a = t.rrt_star_extend(0, cfg(&[1.0, 0.0]), &p, |_, _, _| true).unwrap();
        let far = t.rrt_star_extend(a, cfg(&[3.0, 2.0]), &p, |_, _, _| true).unwrap();
        let b = t.rrt_star_extend(0, cfg(&[1.5, 2.0]), &p, |_, _, _| true).unwrap();
        let _ = b;
        let dist = dijkstra(&t, t.considered_edges().unwrap());
        for (i, d) in dist.iter().enumerate() {
            assert!((t.node(i).cost - d).abs() < 1e-9, "node {i}");
        }
        assert!(t.node(far).cost <= 1.0 + (4.0f64 + 4.0).sqrt() + 1e-12);
    }

    proptest! {
        #[test]
        fn costs_match_dijkstra(points in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..60),
                                wall in -2.0..2.0f64) {
            let mut t = Tree::with_root(cfg(&[0.0, 0.0]), usize::MAX);
            t.record_considered_edges();
            // edges crossing the line x = wall above y = 0 are blocked
            let free = |a: &Configuration, b: &Configuration, _: usize| {
                let (xa, xb) = (a[0] - wall, b[0] - wall);
                !(xa * xb < 0.0 && a[1].max(b[1]) > 0.0)
            };
            let p = flat(20.0, 3.0);
            for (x, y) in points {
                let q = cfg(&[x, y]);
                let near = t.nearest(&q);
                t.rrt_star_extend(near, q, &p, free);
            }
            let on_tree = dijkstra(&t, &tree_edges(&t));
            let considered = dijkstra(&t, t.considered_edges().unwrap());
            for i in 0..t.len() {
                let c = t.node(i).cost;
                prop_assert!((c - on_tree[i]).abs() <= 1e-9);
                prop_assert!(c >= considered[i] - 1e-9);
            }
            // every parent edge is itself collision free
            for (a, b) in tree_edges(&t) {
                prop_assert!(free(&t.node(a).config, &t.node(b).config, 0));
            }
        }

        #[test]
        fn nearest_matches_linear_scan(points in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..40),
                                       qx in -6.0..6.0f64, qy in -6.0..6.0f64) {
            let mut t = Tree::with_root(cfg(&[0.0, 0.0]), usize::MAX);
            for (x, y) in points {
                let q = cfg(&[x, y]);
                let n = t.nearest(&q);
                t.rrt_star_extend(n, q, &flat(0.0, 1.0), |_, _, _| true);
            }
            let q = cfg(&[qx, qy]);
            let got = t.nearest(&q);
            let best = t.nodes().iter().map(|n| n.config.distance(&q)).fold(f64::INFINITY, f64::min);
            prop_assert!(t.node(got).config.distance(&q) == best);
            prop_assert!(t.nodes()[..got].iter().all(|n| n.config.distance(&q) > best));
        }
    }

    #[test]
    fn layers_only_advance_through_entry_nodes() {
        let mut t = Tree::with_root(cfg(&[0.0]), 2);
        let p0 = ExtendParams {
            gamma: 10.0,
            alpha: 5.0,
            layer: 1,
            entry: false,
        };
        assert!(t.rrt_star_extend(0, cfg(&[1.0]), &p0, |_, _, _| true).is_none());
        let entry = ExtendParams { entry: true, ..p0 };
        let e = t.rrt_star_extend(0, cfg(&[1.0]), &entry, |_, _, _| true).unwrap();
        let goal = ExtendParams {
            layer: 2,
            entry: true,
            ..p0
        };
        let g = t.rrt_star_extend(e, cfg(&[2.0]), &goal, |_, _, _| true).unwrap();
        // terminal nodes are never returned by nearest
        assert_ne!(t.nearest(&cfg(&[2.0])), g);
        let stay = ExtendParams { layer: 2, entry: false, ..p0 };
        assert!(t.rrt_star_extend(g, cfg(&[3.0]), &stay, |_, _, _| true).is_none());
    }

    #[test]
    fn branch_stops_at_seed() {
        let mut t = Tree::empty(usize::MAX);
        let s = t.add_seed(cfg(&[0.0]), 4.0, 17);
        let a = t.rrt_star_extend(s, cfg(&[1.0]), &flat(0.0, 1.0), |_, _, _| true).unwrap();
        assert_eq!(t.branch(a), (vec![s, a], Some(17)));
        assert_eq!(t.node(a).cost, 5.0);
    }
}
