//! Word-interned undirected weighted graphs and multilayer networks.
//!
//! Every layer of a [`MultilayerNetwork`] shares one [`WordTable`], so a word
//! has the same [`NodeId`] in every layer even when some layers lack it.
//! Graphs are plain values: every operation returns a new graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("layers are not aligned on the same node set")]
    UnalignedLayers,
    #[error("edge weight must be finite and positive, got {0}")]
    InvalidWeight(f64),
    #[error("layer {0} already present in the network")]
    DuplicateLayer(LayerKind),
}

/// Index of a word in a [`WordTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Canonical surface form of a word: trimmed, lowercased, with underscores
/// and whitespace runs collapsed to single spaces.
pub fn normalize_word(raw: &str) -> String {
    let lowered = raw.trim().to_lowercase().replace('_', " ");
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Bidirectional map between normalized words and node ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordTable {
    words: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl WordTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `word`, allocating one if needed. Empty words are rejected.
    pub fn intern(&mut self, word: &str) -> Option<NodeId> {
        let word = normalize_word(word);
        if word.is_empty() {
            return None;
        }
        if let Some(&id) = self.index.get(&word) {
            return Some(id);
        }
        let id = NodeId(self.words.len() as u32);
        self.words.push(word.clone());
        self.index.insert(word, id);
        Some(id)
    }

    /// Case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<NodeId> {
        self.index.get(&normalize_word(word)).copied()
    }

    pub fn word(&self, id: NodeId) -> &str {
        &self.words[id.index()]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Undirected weighted graph without self-loops.
///
/// Edges are keyed by `(min, max)` so each unordered pair is stored once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
}

fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn check_weight(w: f64) -> Result<(), GraphError> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(GraphError::InvalidWeight(w))
    }
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: NodeId) {
        self.nodes.insert(node);
    }

    /// Sets the weight of edge `a–b`, adding both endpoints.
    ///
    /// Self-loops are dropped and reported by returning `Ok(false)`.
    pub fn set_edge(&mut self, a: NodeId, b: NodeId, weight: f64) -> Result<bool, GraphError> {
        check_weight(weight)?;
        if a == b {
            return Ok(false);
        }
        self.nodes.insert(a);
        self.nodes.insert(b);
        self.edges.insert(edge_key(a, b), weight);
        Ok(true)
    }

    /// Keeps the larger of the existing and the new weight.
    pub fn set_edge_max(&mut self, a: NodeId, b: NodeId, weight: f64) -> Result<bool, GraphError> {
        let current = self.weight(a, b).unwrap_or(0.0);
        self.set_edge(a, b, current.max(weight))
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_set(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    /// Edges as `(a, b, weight)` with `a < b`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Density `2|E| / (|V|(|V|-1))`.
    pub fn density(&self) -> f64 {
        let n = self.node_count() as f64;
        if n < 2.0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / (n * (n - 1.0))
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    /// Subgraph induced by the nodes for which `keep` holds.
    pub fn induced<F: Fn(NodeId) -> bool>(&self, keep: F) -> WeightedGraph {
        let nodes: BTreeSet<NodeId> = self.nodes.iter().copied().filter(|&n| keep(n)).collect();
        let edges = self
            .edges
            .iter()
            .filter(|((a, b), _)| nodes.contains(a) && nodes.contains(b))
            .map(|(&k, &w)| (k, w))
            .collect();
        WeightedGraph { nodes, edges }
    }

    /// Compressed adjacency view over the graph's nodes in id order.
    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    /// Same graph with `extra` added as isolated nodes.
    pub fn padded(&self, extra: impl IntoIterator<Item = NodeId>) -> WeightedGraph {
        let mut out = self.clone();
        out.nodes.extend(extra);
        out
    }
}

/// CSR adjacency with local indices `0..n` in node-id order.
#[derive(Debug, Clone)]
pub struct Adjacency {
    nodes: Vec<NodeId>,
    local: HashMap<NodeId, usize>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    fn new(g: &WeightedGraph) -> Self {
        let nodes: Vec<NodeId> = g.nodes.iter().copied().collect();
        let local: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        for (&(a, b), &w) in &g.edges {
            let (ia, ib) = (local[&a], local[&b]);
            lists[ia].push((ib, w));
            lists[ib].push((ia, w));
        }
        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        let mut neighbors = Vec::with_capacity(2 * g.edge_count());
        let mut weights = Vec::with_capacity(2 * g.edge_count());
        offsets.push(0);
        for mut list in lists {
            list.sort_by_key(|&(j, _)| j);
            for (j, w) in list {
                neighbors.push(j);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Adjacency { nodes, local, offsets, neighbors, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> NodeId {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn local_index(&self, node: NodeId) -> Option<usize> {
        self.local.get(&node).copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Hop distances from `source`; unreachable nodes are `usize::MAX`.
    pub fn bfs(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u] + 1;
            for &v in self.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = next;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Connected components as lists of local indices, each sorted ascending,
    /// ordered by their smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Induced subgraph on the largest connected component.
///
/// Ties go to the component containing the smallest node id.
pub fn largest_connected_component(g: &WeightedGraph) -> Result<WeightedGraph, GraphError> {
    if g.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let adj = g.adjacency();
    // components are ordered by smallest member, so the first maximum wins ties
    let mut best: Option<Vec<usize>> = None;
    for comp in adj.components() {
        if best.as_ref().map_or(true, |b| comp.len() > b.len()) {
            best = Some(comp);
        }
    }
    let keep: BTreeSet<NodeId> = best.unwrap_or_default().into_iter().map(|i| adj.node(i)).collect();
    Ok(g.induced(|n| keep.contains(&n)))
}

/// Drops every edge with weight `<= threshold`. Nodes are kept.
pub fn remove_idiosyncratic_edges(g: &WeightedGraph, threshold: f64) -> WeightedGraph {
    WeightedGraph {
        nodes: g.nodes.clone(),
        edges: g.edges.iter().filter(|(_, &w)| w > threshold).map(|(&k, &w)| (k, w)).collect(),
    }
}

/// Induced subgraph on the nodes whose word is in `vocab`.
pub fn restrict_to_vocabulary(g: &WeightedGraph, words: &WordTable, vocab: &BTreeSet<String>) -> WeightedGraph {
    g.induced(|n| vocab.contains(words.word(n)))
}

/// Edge-wise weight sum of two layers on the same node set.
pub fn aggregate(g1: &WeightedGraph, g2: &WeightedGraph) -> Result<WeightedGraph, GraphError> {
    if g1.nodes != g2.nodes {
        return Err(GraphError::UnalignedLayers);
    }
    let mut edges = g1.edges.clone();
    for (&k, &w) in &g2.edges {
        *edges.entry(k).or_insert(0.0) += w;
    }
    Ok(WeightedGraph { nodes: g1.nodes.clone(), edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Associative,
    Definitional,
    Categorical,
}

impl LayerKind {
    pub const ALL: [LayerKind; 3] = [LayerKind::Associative, LayerKind::Definitional, LayerKind::Categorical];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Associative => "associative",
            LayerKind::Definitional => "definitional",
            LayerKind::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<LayerKind> {
        LayerKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Node-aligned layers for one agent, sharing one word table.
#[derive(Debug, Clone)]
pub struct MultilayerNetwork {
    pub agent: String,
    pub words: WordTable,
    layers: Vec<(LayerKind, WeightedGraph)>,
}

impl MultilayerNetwork {
    pub fn new(agent: impl Into<String>, words: WordTable) -> Self {
        MultilayerNetwork { agent: agent.into(), words, layers: Vec::new() }
    }

    pub fn add_layer(&mut self, kind: LayerKind, graph: WeightedGraph) -> Result<(), GraphError> {
        if self.layer(kind).is_some() {
            return Err(GraphError::DuplicateLayer(kind));
        }
        self.layers.push((kind, graph));
        Ok(())
    }

    pub fn layer(&self, kind: LayerKind) -> Option<&WeightedGraph> {
        self.layers.iter().find(|(k, _)| *k == kind).map(|(_, g)| g)
    }

    pub fn layers(&self) -> &[(LayerKind, WeightedGraph)] {
        &self.layers
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(table: &mut WordTable, edges: &[(&str, &str, f64)]) -> WeightedGraph {
        let mut g = WeightedGraph::new();
        for &(a, b, w) in edges {
            let a = table.intern(a).unwrap();
            let b = table.intern(b).unwrap();
            g.set_edge(a, b, w).unwrap();
        }
        g
    }

    fn words_of(g: &WeightedGraph, t: &WordTable) -> BTreeSet<String> {
        g.nodes().map(|n| t.word(n).to_string()).collect()
    }

    #[test]
    fn word_table_is_case_insensitive() {
        let mut t = WordTable::new();
        let a = t.intern("  Doctor ").unwrap();
        assert_eq!(t.intern("doctor"), Some(a));
        assert_eq!(t.get("DOCTOR"), Some(a));
        assert_eq!(t.word(a), "doctor");
        assert_eq!(t.intern("police_officer"), t.intern("Police   Officer"));
        assert_eq!(t.intern("   "), None);
    }

    #[test]
    fn self_loops_are_dropped_and_weights_validated() {
        let mut t = WordTable::new();
        let a = t.intern("a").unwrap();
        let b = t.intern("b").unwrap();
        let mut g = WeightedGraph::new();
        assert_eq!(g.set_edge(a, a, 2.0), Ok(false));
        assert_eq!(g.edge_count(), 0);
        assert!(g.set_edge(a, b, 0.0).is_err());
        assert!(g.set_edge(a, b, f64::NAN).is_err());
        g.set_edge(b, a, 2.0).unwrap();
        assert_eq!(g.weight(a, b), Some(2.0));
        g.set_edge_max(a, b, 1.0).unwrap();
        assert_eq!(g.weight(a, b), Some(2.0));
        g.set_edge_max(a, b, 5.0).unwrap();
        assert_eq!(g.weight(b, a), Some(5.0));
    }

    #[test]
    fn lcc_picks_the_strictly_larger_component() {
        let mut t = WordTable::new();
        let g = graph(
            &mut t,
            &[("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0), ("d", "e", 1.0), ("e", "f", 1.0), ("f", "d", 1.0), ("f", "p", 1.0)],
        );
        let lcc = largest_connected_component(&g).unwrap();
        assert_eq!(words_of(&lcc, &t), ["d", "e", "f", "p"].iter().map(|s| s.to_string()).collect());
        assert_eq!(lcc.edge_count(), 4);
    }

    #[test]
    fn lcc_of_connected_graph_is_identity() {
        let mut t = WordTable::new();
        let g = graph(&mut t, &[("a", "b", 2.0), ("b", "c", 3.0)]);
        assert_eq!(largest_connected_component(&g).unwrap(), g);
    }

    #[test]
    fn lcc_ties_go_to_smallest_node_id() {
        let mut t = WordTable::new();
        let g = graph(&mut t, &[("x", "y", 1.0), ("a", "b", 1.0)]);
        let lcc = largest_connected_component(&g).unwrap();
        assert!(lcc.contains_node(t.get("x").unwrap()));
    }

    #[test]
    fn lcc_of_empty_graph_errors() {
        assert_eq!(largest_connected_component(&WeightedGraph::new()), Err(GraphError::EmptyGraph));
    }

    /// Brute-force components: repeatedly close a seed set under edge adjacency.
    fn brute_components(g: &WeightedGraph) -> Vec<BTreeSet<NodeId>> {
        let mut remaining: BTreeSet<NodeId> = g.nodes().collect();
        let mut comps = Vec::new();
        while let Some(&seed) = remaining.iter().next() {
            let mut comp = BTreeSet::from([seed]);
            loop {
                let before = comp.len();
                for (a, b, _) in g.edges() {
                    if comp.contains(&a) || comp.contains(&b) {
                        comp.insert(a);
                        comp.insert(b);
                    }
                }
                if comp.len() == before {
                    break;
                }
            }
            for n in &comp {
                remaining.remove(n);
            }
            comps.push(comp);
        }
        comps
    }

    #[test]
    fn lcc_star_plus_isolated_edge_matches_enumeration() {
        let mut t = WordTable::new();
        let g = graph(&mut t, &[("c", "l1", 1.0), ("c", "l2", 1.0), ("c", "l3", 1.0), ("u", "v", 1.0)]);
        let comps = brute_components(&g);
        let biggest = comps.iter().max_by_key(|c| c.len()).unwrap();
        let lcc = largest_connected_component(&g).unwrap();
        assert_eq!(lcc.node_set(), biggest);
        assert_eq!(biggest.len(), 4);
    }

    #[test]
    fn idiosyncratic_removal() {
        let mut t = WordTable::new();
        let g = graph(&mut t, &[("a", "b", 1.0), ("b", "c", 3.0)]);
        let r = remove_idiosyncratic_edges(&g, 1.0);
        assert_eq!(r.edge_count(), 1);
        assert_eq!(r.weight(t.get("b").unwrap(), t.get("c").unwrap()), Some(3.0));
        assert_eq!(r.node_count(), 3);

        let heavy = graph(&mut t, &[("a", "b", 2.0), ("b", "c", 3.0)]);
        assert_eq!(remove_idiosyncratic_edges(&heavy, 1.0), heavy);

        let light = graph(&mut t, &[("a", "b", 1.0), ("a", "c", 1.0)]);
        let r = remove_idiosyncratic_edges(&light, 1.0);
        assert_eq!((r.node_count(), r.edge_count()), (3, 0));
    }

    #[test]
    fn vocabulary_restriction() {
        let mut t = WordTable::new();
        let g = graph(&mut t, &[("a", "b", 1.0), ("b", "c", 1.0)]);
        let vocab: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let r = restrict_to_vocabulary(&g, &t, &vocab);
        assert_eq!(words_of(&r, &t), vocab);
        assert_eq!(r.edge_count(), 1);

        let all: BTreeSet<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert_eq!(restrict_to_vocabulary(&g, &t, &all), g);

        let none: BTreeSet<String> = ["z"].iter().map(|s| s.to_string()).collect();
        assert!(restrict_to_vocabulary(&g, &t, &none).is_empty());
    }

    #[test]
    fn aggregation_sums_and_unions() {
        let mut t = WordTable::new();
        let g1 = graph(&mut t, &[("a", "b", 1.0)]);
        let g2 = graph(&mut t, &[("a", "b", 2.0)]);
        let s = aggregate(&g1, &g2).unwrap();
        assert_eq!(s.weight(t.get("a").unwrap(), t.get("b").unwrap()), Some(3.0));

        let bare = WeightedGraph::new().padded(g1.nodes());
        assert_eq!(aggregate(&g1, &bare).unwrap(), g1);

        let x = graph(&mut t, &[("a", "b", 1.0), ("c", "d", 1.0)]).padded([]);
        let mut y = WeightedGraph::new();
        y.set_edge(t.get("a").unwrap(), t.get("c").unwrap(), 4.0).unwrap();
        let y = y.padded(x.nodes());
        let u = aggregate(&x, &y).unwrap();
        assert_eq!(u.edge_count(), 3);
        assert_eq!(u.weight(t.get("a").unwrap(), t.get("c").unwrap()), Some(4.0));

        let other = graph(&mut t, &[("q", "r", 1.0)]);
        assert_eq!(aggregate(&g1, &other), Err(GraphError::UnalignedLayers));
    }

    #[test]
    fn duplicate_layer_kinds_rejected() {
        let mut m = MultilayerNetwork::new("humans", WordTable::new());
        m.add_layer(LayerKind::Associative, WeightedGraph::new()).unwrap();
        assert_eq!(
            m.add_layer(LayerKind::Associative, WeightedGraph::new()),
            Err(GraphError::DuplicateLayer(LayerKind::Associative))
        );
    }

    fn arb_graph() -> impl Strategy<Value = WeightedGraph> {
        proptest::collection::vec((0u32..30, 0u32..30, 1u32..6), 0..60).prop_map(|edges| {
            let mut g = WeightedGraph::new();
            for (a, b, w) in edges {
                g.add_node(NodeId(a));
                let _ = g.set_edge(NodeId(a), NodeId(b), w as f64);
            }
            g
        })
    }

    proptest! {
        #[test]
        fn lcc_is_idempotent(g in arb_graph()) {
            prop_assume!(!g.is_empty());
            let once = largest_connected_component(&g).unwrap();
            let twice = largest_connected_component(&once).unwrap();
            prop_assert_eq!(once.clone(), twice);
            prop_assert_eq!(once.adjacency().components().len(), 1);
        }

        #[test]
        fn aggregate_is_commutative_and_associative(a in arb_graph(), b in arb_graph(), c in arb_graph()) {
            let all: BTreeSet<NodeId> = a.nodes().chain(b.nodes()).chain(c.nodes()).collect();
            let (a, b, c) = (a.padded(all.clone()), b.padded(all.clone()), c.padded(all));
            prop_assert_eq!(aggregate(&a, &b).unwrap(), aggregate(&b, &a).unwrap());
            let left = aggregate(&aggregate(&a, &b).unwrap(), &c).unwrap();
            let right = aggregate(&a, &aggregate(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn vocabulary_restriction_is_idempotent(g in arb_graph(), keep in proptest::collection::btree_set(0u32..30, 1..20)) {
            let mut t = WordTable::new();
            for i in 0..30 { t.intern(&format!("w{i}")); }
            let vocab: BTreeSet<String> = keep.iter().map(|i| format!("w{i}")).collect();
            let once = restrict_to_vocabulary(&g, &t, &vocab);
            prop_assert_eq!(restrict_to_vocabulary(&once, &t, &vocab), once);
        }

        #[test]
        fn filter_chain_yields_connected_heavy_graph(g in arb_graph(), keep in proptest::collection::btree_set(0u32..30, 1..30)) {
            let mut t = WordTable::new();
            for i in 0..30 { t.intern(&format!("w{i}")); }
            let vocab: BTreeSet<String> = keep.iter().map(|i| format!("w{i}")).collect();
            let filtered = remove_idiosyncratic_edges(&restrict_to_vocabulary(&g, &t, &vocab), 1.0);
            prop_assume!(!filtered.is_empty());
            let lcc = largest_connected_component(&filtered).unwrap();
            prop_assert_eq!(lcc.adjacency().components().len(), 1);
            prop_assert!(lcc.edges().all(|(_, _, w)| w > 1.0));
        }
    }
}
