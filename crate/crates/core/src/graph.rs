//! Substructure-level molecular graphs and their atom-level expansion.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::vocab::{BondType, SubstructureVocab};

/// Undirected edge between two substructure nodes.
///
/// When an endpoint is a ring node, the matching `site_*` field names the
/// ring atom (position in the ring label) that carries the bond. Atom
/// endpoints have no site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub bond: BondType,
    pub site_u: Option<u8>,
    pub site_v: Option<u8>,
}

impl Edge {
    pub fn new(u: usize, v: usize, bond: BondType) -> Self {
        Edge {
            u,
            v,
            bond,
            site_u: None,
            site_v: None,
        }
    }

    pub fn with_sites(mut self, site_u: Option<u8>, site_v: Option<u8>) -> Self {
        self.site_u = site_u;
        self.site_v = site_v;
        self
    }

    /// The endpoint other than `x`.
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }

    /// Site used at endpoint `x`.
    pub fn site_at(&self, x: usize) -> Option<u8> {
        if self.u == x {
            self.site_u
        } else {
            self.site_v
        }
    }

    fn normalized(self) -> Self {
        if self.u <= self.v {
            self
        } else {
            Edge {
                u: self.v,
                v: self.u,
                bond: self.bond,
                site_u: self.site_v,
                site_v: self.site_u,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {node} has vocabulary id {id}, but the vocabulary has {len} entries")]
    UnknownLabel { node: usize, id: usize, len: usize },
    #[error("edge {edge} references node {node}, but the graph has {n} nodes")]
    NodeOutOfRange { edge: usize, node: usize, n: usize },
    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("edges {first} and {second} join the same pair of nodes")]
    ParallelEdge { first: usize, second: usize },
    #[error("edge {edge}: ring node {node} needs an attachment site")]
    MissingSite { edge: usize, node: usize },
    #[error("edge {edge}: site {site} is out of range for node {node}")]
    BadSite { edge: usize, node: usize, site: u8 },
    #[error("edge {edge}: atom node {node} cannot carry a site")]
    UnexpectedSite { edge: usize, node: usize },
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
}

/// Molecule as a graph of vocabulary substructures.
///
/// Construction checks structure only (ids and indices in range, no
/// self-loops or parallel edges, well-formed ring sites). Chemistry
/// (valence, capacity, connectivity) is judged by
/// [`check_validity`](crate::check_validity), so that invalid candidates
/// can still be represented and reported.
#[derive(Clone)]
pub struct MolGraph {
    vocab: Arc<SubstructureVocab>,
    nodes: Vec<usize>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new(
        vocab: Arc<SubstructureVocab>,
        nodes: Vec<usize>,
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        for (node, &id) in nodes.iter().enumerate() {
            if id >= vocab.len() {
                return Err(GraphError::UnknownLabel {
                    node,
                    id,
                    len: vocab.len(),
                });
            }
        }
        let edges: Vec<Edge> = edges.into_iter().map(Edge::normalized).collect();
        let mut adj = vec![Vec::new(); n];
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            for node in [e.u, e.v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { edge: i, node, n });
                }
            }
            if e.u == e.v {
                return Err(GraphError::SelfLoop { edge: i, node: e.u });
            }
            if let Some(&first) = seen.get(&(e.u, e.v)) {
                return Err(GraphError::ParallelEdge { first, second: i });
            }
            seen.insert((e.u, e.v), i);
            for (node, site) in [(e.u, e.site_u), (e.v, e.site_v)] {
                let entry = vocab.entry(nodes[node]);
                match (entry.ring.as_ref(), site) {
                    (Some(_), None) => return Err(GraphError::MissingSite { edge: i, node }),
                    (Some(r), Some(s)) if usize::from(s) >= r.size() => {
                        return Err(GraphError::BadSite {
                            edge: i,
                            node,
                            site: s,
                        })
                    }
                    (None, Some(_)) => return Err(GraphError::UnexpectedSite { edge: i, node }),
                    _ => {}
                }
            }
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
        }
        Ok(MolGraph {
            vocab,
            nodes,
            edges,
            adj,
        })
    }

    /// One-node graph.
    pub fn single(vocab: Arc<SubstructureVocab>, label: usize) -> Result<Self, GraphError> {
        Self::new(vocab, vec![label], Vec::new())
    }

    pub fn vocab(&self) -> &Arc<SubstructureVocab> {
        &self.vocab
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, node: usize) -> usize {
        self.nodes[node]
    }

    pub fn label_text(&self, node: usize) -> &str {
        &self.vocab.entry(self.nodes[node]).label
    }

    pub fn is_ring(&self, node: usize) -> bool {
        self.vocab.entry(self.nodes[node]).is_ring()
    }

    /// `(neighbour, edge index)` pairs of `node`, in edge order.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a].iter().find(|&&(x, _)| x == b).map(|&(_, e)| e)
    }

    /// Nodes with degree exactly one.
    pub fn leaf_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.degree(v) == 1).collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == n
    }

    pub fn ring_node_count(&self) -> usize {
        (0..self.num_nodes()).filter(|&v| self.is_ring(v)).count()
    }

    /// Multiset of labels as sorted `(label, count)` pairs.
    pub fn label_counts(&self) -> Vec<(usize, usize)> {
        let mut m: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in &self.nodes {
            *m.entry(l).or_default() += 1;
        }
        m.into_iter().collect()
    }

    /// Copy of the graph with one more node attached to `u`.
    pub fn with_leaf(
        &self,
        u: usize,
        label: usize,
        bond: BondType,
        site_u: Option<u8>,
        site_new: Option<u8>,
    ) -> Result<Self, GraphError> {
        if u >= self.num_nodes() {
            return Err(GraphError::NoSuchNode(u));
        }
        let mut nodes = self.nodes.clone();
        nodes.push(label);
        let mut edges = self.edges.clone();
        edges.push(Edge::new(u, nodes.len() - 1, bond).with_sites(site_u, site_new));
        Self::new(self.vocab.clone(), nodes, edges)
    }

    /// Copy of the graph without leaf `v`; later nodes shift down by one.
    pub fn without_leaf(&self, v: usize) -> Result<Self, GraphError> {
        if v >= self.num_nodes() {
            return Err(GraphError::NoSuchNode(v));
        }
        if self.degree(v) != 1 {
            return Err(GraphError::NotALeaf(v));
        }
        self.without_node(v)
    }

    /// Copy of the graph without node `v` and its edges.
    pub fn without_node(&self, v: usize) -> Result<Self, GraphError> {
        if v >= self.num_nodes() {
            return Err(GraphError::NoSuchNode(v));
        }
        let shift = |x: usize| if x > v { x - 1 } else { x };
        let mut nodes = self.nodes.clone();
        nodes.remove(v);
        let edges = self
            .edges
            .iter()
            .filter(|e| e.u != v && e.v != v)
            .map(|e| Edge {
                u: shift(e.u),
                v: shift(e.v),
                ..*e
            })
            .collect();
        Self::new(self.vocab.clone(), nodes, edges)
    }

    /// Copy with node `v` relabelled and its incident edges rewritten.
    ///
    /// `incident[i]` gives `(bond, site at v)` for the `i`-th entry of
    /// `neighbors(v)`. Sites at the far endpoints are kept.
    pub fn with_relabel(
        &self,
        v: usize,
        label: usize,
        incident: &[(BondType, Option<u8>)],
    ) -> Result<Self, GraphError> {
        if v >= self.num_nodes() {
            return Err(GraphError::NoSuchNode(v));
        }
        assert_eq!(incident.len(), self.degree(v), "one assignment per incident edge");
        let mut nodes = self.nodes.clone();
        nodes[v] = label;
        let mut edges = self.edges.clone();
        for (&(_, ei), &(bond, site)) in self.adj[v].iter().zip(incident) {
            let e = &mut edges[ei];
            e.bond = bond;
            if e.u == v {
                e.site_u = site;
            } else {
                e.site_v = site;
            }
        }
        Self::new(self.vocab.clone(), nodes, edges)
    }

    /// Copy with one edge's bond type changed.
    pub fn with_bond(&self, edge: usize, bond: BondType) -> Self {
        let mut g = self.clone();
        g.edges[edge].bond = bond;
        g
    }

    /// Atom-level view: ring nodes are unfolded into their ring atoms.
    pub fn expand(&self) -> AtomGraph {
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        // first atom index of each node
        let mut start = Vec::with_capacity(self.num_nodes());
        for (node, &id) in self.nodes.iter().enumerate() {
            start.push(atoms.len());
            let entry = self.vocab.entry(id);
            match &entry.ring {
                None => atoms.push(Atom {
                    element: entry.label.clone(),
                    aromatic: false,
                    charge: 0,
                    hydrogens: None,
                    offset: 0,
                    node: Some((node, None)),
                }),
                Some(r) => {
                    let base = atoms.len();
                    for (i, ra) in r.atoms.iter().enumerate() {
                        atoms.push(Atom {
                            element: ra.element.clone(),
                            aromatic: ra.aromatic,
                            charge: 0,
                            hydrogens: (ra.hydrogens > 0).then_some(ra.hydrogens),
                            offset: 0,
                            node: Some((node, Some(i as u8))),
                        });
                    }
                    let n = r.size();
                    for (i, &b) in r.bonds.iter().enumerate() {
                        bonds.push(AtomBond {
                            a: base + i,
                            b: base + (i + 1) % n,
                            bond: b,
                        });
                    }
                }
            }
        }
        for e in &self.edges {
            let a = start[e.u] + usize::from(e.site_u.unwrap_or(0));
            let b = start[e.v] + usize::from(e.site_v.unwrap_or(0));
            bonds.push(AtomBond { a, b, bond: e.bond });
            // substituents displace explicit hydrogens on ring atoms such as [nH]
            for x in [a, b] {
                if let Some(h) = atoms[x].hydrogens {
                    let left = h.saturating_sub(e.bond.half_order() as u8 / 2);
                    atoms[x].hydrogens = (left > 0).then_some(left);
                }
            }
        }
        AtomGraph { atoms, bonds }
    }
}

impl PartialEq for MolGraph {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.vocab, &other.vocab) || self.vocab == other.vocab)
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

impl fmt::Debug for MolGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = (0..self.num_nodes()).map(|v| self.label_text(v)).collect();
        f.debug_struct("MolGraph")
            .field("nodes", &labels)
            .field("edges", &self.edges)
            .finish()
    }
}

/// One atom of an [`AtomGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    /// Capitalised element symbol (`C`, `Cl`, `N`).
    pub element: String,
    pub aromatic: bool,
    pub charge: i8,
    /// Explicit hydrogen count from a bracket atom.
    pub hydrogens: Option<u8>,
    /// Byte offset in the source SMILES (0 for atoms produced by expansion).
    pub offset: usize,
    /// Originating substructure node and ring position, when known.
    pub node: Option<(usize, Option<u8>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomBond {
    pub a: usize,
    pub b: usize,
    pub bond: BondType,
}

/// Plain atom/bond graph used for SMILES I/O and ring perception.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtomGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<AtomBond>,
}

impl AtomGraph {
    /// `(neighbour, bond index)` lists for every atom.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (i, b) in self.bonds.iter().enumerate() {
            adj[b.a].push((b.b, i));
            adj[b.b].push((b.a, i));
        }
        adj
    }

    /// Bond indices whose removal disconnects the graph.
    pub fn bridges(&self) -> Vec<bool> {
        let adj = self.adjacency();
        let n = self.atoms.len();
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut time = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // iterative DFS: (vertex, parent edge, next neighbour index)
            let mut stack = vec![(root, usize::MAX, 0usize)];
            disc[root] = time;
            low[root] = time;
            time += 1;
            while let Some(&mut (x, pe, ref mut it)) = stack.last_mut() {
                if *it < adj[x].len() {
                    let (y, ei) = adj[x][*it];
                    *it += 1;
                    if ei == pe {
                        continue;
                    }
                    if disc[y] == usize::MAX {
                        disc[y] = time;
                        low[y] = time;
                        time += 1;
                        stack.push((y, ei, 0));
                    } else {
                        low[x] = low[x].min(disc[y]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[x]);
                        if low[x] > disc[p] {
                            is_bridge[pe] = true;
                        }
                    }
                }
            }
        }
        is_bridge
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> Arc<SubstructureVocab> {
        SubstructureVocab::desk()
    }

    fn path(labels: &[&str]) -> MolGraph {
        let v = desk();
        let nodes: Vec<usize> = labels.iter().map(|l| v.lookup(l).unwrap()).collect();
        let edges = (1..nodes.len())
            .map(|i| Edge::new(i - 1, i, BondType::Single))
            .collect();
        MolGraph::new(v, nodes, edges).unwrap()
    }

    #[test]
    fn leaves_of_small_graphs() {
        assert_eq!(path(&["C", "C"]).leaf_nodes(), vec![0, 1]);
        assert_eq!(path(&["C", "C", "O"]).leaf_nodes(), vec![0, 2]);
        let v = desk();
        let tri = MolGraph::new(
            v,
            vec![0, 0, 0],
            vec![
                Edge::new(0, 1, BondType::Single),
                Edge::new(1, 2, BondType::Single),
                Edge::new(2, 0, BondType::Single),
            ],
        )
        .unwrap();
        assert!(tri.leaf_nodes().is_empty());
    }

    #[test]
    fn structural_errors() {
        let v = desk();
        let c = v.lookup("C").unwrap();
        let bz = v.lookup("c1ccccc1").unwrap();
        assert!(matches!(
            MolGraph::new(v.clone(), vec![c], vec![Edge::new(0, 0, BondType::Single)]),
            Err(GraphError::SelfLoop { .. })
        ));
        assert!(matches!(
            MolGraph::new(
                v.clone(),
                vec![c, c],
                vec![Edge::new(0, 1, BondType::Single), Edge::new(1, 0, BondType::Double)]
            ),
            Err(GraphError::ParallelEdge { .. })
        ));
        assert!(matches!(
            MolGraph::new(v.clone(), vec![c], vec![Edge::new(0, 1, BondType::Single)]),
            Err(GraphError::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            MolGraph::new(v.clone(), vec![bz, c], vec![Edge::new(0, 1, BondType::Single)]),
            Err(GraphError::MissingSite { .. })
        ));
        assert!(matches!(
            MolGraph::new(
                v.clone(),
                vec![bz, c],
                vec![Edge::new(0, 1, BondType::Single).with_sites(Some(6), None)]
            ),
            Err(GraphError::BadSite { .. })
        ));
        assert!(matches!(
            MolGraph::new(v, vec![99], vec![]),
            Err(GraphError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn leaf_edits() {
        let g = path(&["C", "C", "O"]);
        let g2 = g.with_leaf(1, 1, BondType::Single, None, None).unwrap();
        assert_eq!(g2.num_nodes(), 4);
        assert_eq!(g2.degree(1), 3);
        let g3 = g2.without_leaf(0).unwrap();
        assert_eq!(g3.num_nodes(), 3);
        assert_eq!(g3.degree(0), 2);
        assert!(g3.is_connected());
        assert!(matches!(g2.without_leaf(1), Err(GraphError::NotALeaf(1))));
    }

    #[test]
    fn expand_benzene_with_substituent() {
        let v = desk();
        let bz = v.lookup("c1ccccc1").unwrap();
        let g = MolGraph::new(
            v,
            vec![bz, 0],
            vec![Edge::new(0, 1, BondType::Single).with_sites(Some(2), None)],
        )
        .unwrap();
        let a = g.expand();
        assert_eq!(a.atoms.len(), 7);
        assert_eq!(a.bonds.len(), 7);
        assert!(a.bonds.iter().any(|b| b.a == 2 && b.b == 6));
        let bridges = a.bridges();
        assert_eq!(bridges.iter().filter(|&&x| x).count(), 1);
    }
}
