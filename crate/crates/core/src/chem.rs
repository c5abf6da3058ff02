//! Validity rules and enumeration of legal bonds and ring attachments.
//!
//! Bond orders are tracked in half units (single 2, double 4, triple 6,
//! aromatic 3). An atom node is within valence when its half-order sum is at
//! most `2 * max_valence + 1`, i.e. the aromatic total is floored. Ring nodes
//! are limited by their attachment capacity and by the free valence of each
//! ring atom used as a site.

use std::collections::BTreeSet;
use std::fmt;

use crate::canon::{canonical_key_capped, CanonicalKey};
use crate::graph::{AtomBond, AtomGraph, Edge, MolGraph};
use crate::vocab::BondType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    Disconnected,
    /// Atom node over its valence (half-order units).
    Valence { node: usize, used: u32, max: u32 },
    /// Ring node with more external edges than its capacity.
    Capacity { node: usize, edges: usize, capacity: u8 },
    /// Ring atom carrying more external bond order than it has free.
    SiteValence { node: usize, site: u8, used: u32, free: u8 },
    /// External bond to a ring node typed aromatic.
    AromaticExternal { node: usize, edge: usize },
    /// Aromatic bond that lies on no cycle.
    AromaticBridge { node: usize, edge: usize },
}

impl Violation {
    pub fn node(&self) -> Option<usize> {
        match *self {
            Violation::Empty | Violation::Disconnected => None,
            Violation::Valence { node, .. }
            | Violation::Capacity { node, .. }
            | Violation::SiteValence { node, .. }
            | Violation::AromaticExternal { node, .. }
            | Violation::AromaticBridge { node, .. } => Some(node),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no nodes"),
            Violation::Disconnected => write!(f, "graph is not connected"),
            Violation::Valence { node, used, max } => write!(
                f,
                "node {node}: bond order {} exceeds valence {max}",
                f64::from(*used) / 2.0
            ),
            Violation::Capacity {
                node,
                edges,
                capacity,
            } => write!(
                f,
                "node {node}: {edges} external bonds exceed attachment capacity {capacity}"
            ),
            Violation::SiteValence {
                node,
                site,
                used,
                free,
            } => write!(
                f,
                "node {node} site {site}: bond order {} exceeds free valence {free}",
                f64::from(*used) / 2.0
            ),
            Violation::AromaticExternal { node, edge } => {
                write!(f, "node {node}: edge {edge} to a ring node cannot be aromatic")
            }
            Violation::AromaticBridge { node, edge } => {
                write!(f, "node {node}: aromatic edge {edge} is not on a cycle")
            }
        }
    }
}

/// Outcome of [`check_validity`]. `valid` holds exactly when `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    /// Violations as `(node, reason)` pairs.
    pub fn entries(&self) -> Vec<(Option<usize>, String)> {
        self.violations
            .iter()
            .map(|v| (v.node(), v.to_string()))
            .collect()
    }
}

pub fn check_validity(g: &MolGraph) -> ValidityReport {
    let mut violations = Vec::new();
    if g.num_nodes() == 0 {
        violations.push(Violation::Empty);
        return ValidityReport {
            valid: false,
            violations,
        };
    }
    if !g.is_connected() {
        violations.push(Violation::Disconnected);
    }
    let vocab = g.vocab();
    for node in 0..g.num_nodes() {
        let entry = vocab.entry(g.label(node));
        match &entry.ring {
            None => {
                let used: u32 = g
                    .neighbors(node)
                    .iter()
                    .map(|&(_, e)| g.edges()[e].bond.half_order())
                    .sum();
                let max = u32::from(entry.max_valence);
                if used > 2 * max + 1 {
                    violations.push(Violation::Valence { node, used, max });
                }
            }
            Some(ring) => {
                if g.degree(node) > usize::from(entry.attachment_capacity) {
                    violations.push(Violation::Capacity {
                        node,
                        edges: g.degree(node),
                        capacity: entry.attachment_capacity,
                    });
                }
                let mut per_site = vec![0u32; ring.size()];
                for &(_, e) in g.neighbors(node) {
                    let edge = &g.edges()[e];
                    if edge.bond == BondType::Aromatic {
                        violations.push(Violation::AromaticExternal { node, edge: e });
                    }
                    if let Some(s) = edge.site_at(node) {
                        per_site[usize::from(s)] += edge.bond.half_order();
                    }
                }
                for (site, &used) in per_site.iter().enumerate() {
                    let free = ring.site_valence[site];
                    if used > 2 * u32::from(free) {
                        violations.push(Violation::SiteValence {
                            node,
                            site: site as u8,
                            used,
                            free,
                        });
                    }
                }
            }
        }
    }
    if g.edges().iter().any(|e| e.bond == BondType::Aromatic) {
        let bridges = substructure_bridges(g);
        for (i, e) in g.edges().iter().enumerate() {
            if e.bond == BondType::Aromatic && bridges[i] && !g.is_ring(e.u) && !g.is_ring(e.v) {
                violations.push(Violation::AromaticBridge { node: e.u, edge: i });
            }
        }
    }
    ValidityReport {
        valid: violations.is_empty(),
        violations,
    }
}

pub fn is_valid(g: &MolGraph) -> bool {
    check_validity(g).valid
}

fn substructure_bridges(g: &MolGraph) -> Vec<bool> {
    let a = AtomGraph {
        atoms: (0..g.num_nodes())
            .map(|_| crate::graph::Atom {
                element: String::new(),
                aromatic: false,
                charge: 0,
                hydrogens: None,
                offset: 0,
                node: None,
            })
            .collect(),
        bonds: g
            .edges()
            .iter()
            .map(|e| AtomBond {
                a: e.u,
                b: e.v,
                bond: e.bond,
            })
            .collect(),
    };
    a.bridges()
}

/// Free bond order (half units) left at `node`, ignoring edge `skip`.
/// For ring nodes this is the free valence at `site`.
pub fn free_half_order(g: &MolGraph, node: usize, site: Option<u8>, skip: Option<usize>) -> u32 {
    let entry = g.vocab().entry(g.label(node));
    let used: u32 = g
        .neighbors(node)
        .iter()
        .filter(|&&(_, e)| Some(e) != skip)
        .filter(|&&(_, e)| entry.ring.is_none() || g.edges()[e].site_at(node) == site)
        .map(|&(_, e)| g.edges()[e].bond.half_order())
        .sum();
    match &entry.ring {
        None => (2 * u32::from(entry.max_valence) + 1).saturating_sub(used),
        Some(r) => {
            let s = usize::from(site.unwrap_or(0));
            (2 * u32::from(r.site_valence.get(s).copied().unwrap_or(0))).saturating_sub(used)
        }
    }
}

/// Whether `node` can take one more external edge.
pub fn has_spare_capacity(g: &MolGraph, node: usize) -> bool {
    let entry = g.vocab().entry(g.label(node));
    match &entry.ring {
        None => free_half_order(g, node, None, None) >= 2,
        Some(r) => {
            g.degree(node) < usize::from(entry.attachment_capacity)
                && (0..r.size()).any(|s| free_half_order(g, node, Some(s as u8), None) >= 2)
        }
    }
}

/// Bond types for edge `(u, v)` that leave the graph valid.
///
/// If the edge exists its type is varied in place. Otherwise the edge is
/// added; a ring endpoint is tried at every site and a type is kept when
/// some site admits it.
pub fn enumerate_bond_types(g: &MolGraph, u: usize, v: usize) -> Vec<BondType> {
    if u == v || u >= g.num_nodes() || v >= g.num_nodes() {
        return Vec::new();
    }
    if let Some(ei) = g.edge_between(u, v) {
        return BondType::ALL
            .into_iter()
            .filter(|&t| is_valid(&g.with_bond(ei, t)))
            .collect();
    }
    let sites = |x: usize| -> Vec<Option<u8>> {
        match g.vocab().entry(g.label(x)).ring.as_ref() {
            None => vec![None],
            Some(r) => (0..r.size() as u8).map(Some).collect(),
        }
    };
    let (su, sv) = (sites(u), sites(v));
    BondType::ALL
        .into_iter()
        .filter(|&t| {
            su.iter().any(|&a| {
                sv.iter().any(|&b| {
                    let mut edges = g.edges().to_vec();
                    edges.push(Edge::new(u, v, t).with_sites(a, b));
                    MolGraph::new(g.vocab().clone(), g.nodes().to_vec(), edges)
                        .map(|h| is_valid(&h))
                        .unwrap_or(false)
                })
            })
        })
        .collect()
}

/// Candidate graphs joining `ring_node` to `neighbor` at every legal
/// attachment position and bond type, deduplicated by canonical key.
///
/// If the two nodes are already bonded, that edge is re-placed; otherwise a
/// new edge is added. When `neighbor` is itself a ring, its site is
/// enumerated too.
pub fn enumerate_ring_attachments(g: &MolGraph, ring_node: usize, neighbor: usize) -> Vec<MolGraph> {
    attachments_with_keys(g, ring_node, neighbor, 64)
        .into_iter()
        .map(|(_, h)| h)
        .collect()
}

pub(crate) fn attachments_with_keys(
    g: &MolGraph,
    ring_node: usize,
    neighbor: usize,
    cap: usize,
) -> Vec<(CanonicalKey, MolGraph)> {
    if ring_node == neighbor
        || ring_node >= g.num_nodes()
        || neighbor >= g.num_nodes()
        || !g.is_ring(ring_node)
    {
        return Vec::new();
    }
    let site_list = |x: usize| -> Vec<Option<u8>> {
        match g.vocab().entry(g.label(x)).ring.as_ref() {
            None => vec![None],
            Some(r) => (0..r.size() as u8).map(Some).collect(),
        }
    };
    let existing = g.edge_between(ring_node, neighbor);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for sr in site_list(ring_node) {
        for sn in site_list(neighbor) {
            for t in BondType::ALL {
                let mut edges = g.edges().to_vec();
                let e = Edge::new(ring_node, neighbor, t).with_sites(sr, sn);
                match existing {
                    Some(ei) => edges[ei] = e,
                    None => edges.push(e),
                }
                let Ok(h) = MolGraph::new(g.vocab().clone(), g.nodes().to_vec(), edges) else {
                    continue;
                };
                if !is_valid(&h) {
                    continue;
                }
                let Ok(key) = canonical_key_capped(&h, cap) else {
                    continue;
                };
                if seen.insert(key.clone()) {
                    out.push((key, h));
                }
            }
        }
    }
    out
}
