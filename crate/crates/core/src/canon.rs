//! Canonical keys and exact isomorphism for substructure graphs.
//!
//! Two graphs are isomorphic when a node bijection preserves labels and
//! bond types, and every ring node's attachment sites agree up to a symmetry
//! of that ring.
//!
//! Keys come from colour refinement with individualisation: every discrete
//! ordering reachable from the refined partition is serialised and the
//! smallest serialisation wins. Interchangeable twin nodes are individualised
//! once, which keeps symmetric trees cheap.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::MolGraph;

/// Default node cap for exact canonicalisation.
pub const DEFAULT_CANON_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("graph has {nodes} nodes, above the canonicalisation cap of {cap}")]
    TooLarge { nodes: usize, cap: usize },
}

/// Isomorphism-invariant text key of a [`MolGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_key(g: &MolGraph) -> Result<CanonicalKey, CanonError> {
    canonical_key_capped(g, DEFAULT_CANON_CAP)
}

pub fn canonical_key_capped(g: &MolGraph, cap: usize) -> Result<CanonicalKey, CanonError> {
    let n = g.num_nodes();
    if n > cap {
        return Err(CanonError::TooLarge { nodes: n, cap });
    }
    let c = Canon::new(g);
    let mut colors = c.initial_colors();
    c.refine(&mut colors);
    let mut best: Option<Vec<u32>> = None;
    c.search(colors, &mut best);
    let code = best.unwrap_or_default();
    Ok(CanonicalKey(format_code(g, &code)))
}

const NO_SITE: u32 = u32::MAX;

struct Canon<'a> {
    g: &'a MolGraph,
    /// Representative of each node's twin class.
    twin: Vec<usize>,
}

impl<'a> Canon<'a> {
    fn new(g: &'a MolGraph) -> Self {
        let n = g.num_nodes();
        let sig = |x: usize| {
            let mut s: Vec<(usize, usize, u32, u32)> = g
                .neighbors(x)
                .iter()
                .map(|&(y, e)| {
                    let ed = &g.edges()[e];
                    (
                        y,
                        ed.bond.index(),
                        ed.site_at(x).map_or(NO_SITE, u32::from),
                        ed.site_at(y).map_or(NO_SITE, u32::from),
                    )
                })
                .collect();
            s.sort_unstable();
            (g.label(x), s)
        };
        let sigs: Vec<_> = (0..n).map(sig).collect();
        let twin = (0..n)
            .map(|x| (0..=x).find(|&y| sigs[y] == sigs[x]).unwrap_or(x))
            .collect();
        Canon { g, twin }
    }

    fn initial_colors(&self) -> Vec<u32> {
        let g = self.g;
        let inv: Vec<(usize, usize, Vec<usize>)> = (0..g.num_nodes())
            .map(|x| {
                let mut bonds: Vec<usize> = g
                    .neighbors(x)
                    .iter()
                    .map(|&(_, e)| g.edges()[e].bond.index())
                    .collect();
                bonds.sort_unstable();
                (g.label(x), g.degree(x), bonds)
            })
            .collect();
        rank(&inv)
    }

    /// Colour refinement until the partition stops splitting.
    fn refine(&self, colors: &mut Vec<u32>) {
        let g = self.g;
        let mut classes = count_classes(colors);
        loop {
            let sig: Vec<(u32, Vec<(u32, usize)>)> = (0..g.num_nodes())
                .map(|x| {
                    let mut s: Vec<(u32, usize)> = g
                        .neighbors(x)
                        .iter()
                        .map(|&(y, e)| (colors[y], g.edges()[e].bond.index()))
                        .collect();
                    s.sort_unstable();
                    (colors[x], s)
                })
                .collect();
            let next = rank(&sig);
            let c = count_classes(&next);
            *colors = next;
            if c == classes {
                break;
            }
            classes = c;
        }
    }

    fn search(&self, colors: Vec<u32>, best: &mut Option<Vec<u32>>) {
        let n = colors.len();
        // first (lowest-colour) non-singleton cell
        let mut counts = vec![0usize; n];
        for &c in &colors {
            counts[c as usize] += 1;
        }
        let Some(cell) = (0..n).find(|&c| counts[c] > 1) else {
            let code = self.serialize(&colors);
            if best.as_ref().is_none_or(|b| code < *b) {
                *best = Some(code);
            }
            return;
        };
        let mut tried_twins: Vec<usize> = Vec::new();
        for v in 0..n {
            if colors[v] as usize != cell {
                continue;
            }
            let t = self.twin[v];
            if tried_twins.contains(&t) {
                continue;
            }
            tried_twins.push(t);
            let split: Vec<(u32, u32)> = colors
                .iter()
                .enumerate()
                .map(|(x, &c)| (c, u32::from(x != v)))
                .collect();
            let mut next = rank(&split);
            self.refine(&mut next);
            self.search(next, best);
        }
    }

    /// Serialises the graph under a discrete colouring (colour = position).
    fn serialize(&self, colors: &[u32]) -> Vec<u32> {
        let g = self.g;
        let n = g.num_nodes();
        let mut by_rank = vec![0usize; n];
        for (x, &c) in colors.iter().enumerate() {
            by_rank[c as usize] = x;
        }
        // per ring node, the symmetry giving the smallest local signature
        let mut sym: Vec<Option<Vec<u8>>> = vec![None; n];
        for x in 0..n {
            let Some(r) = g.vocab().entry(g.label(x)).ring.as_ref() else {
                continue;
            };
            let mut best: Option<(Vec<(u32, u32, usize)>, &Vec<u8>)> = None;
            for perm in &r.symmetries {
                let mut s: Vec<(u32, u32, usize)> = g
                    .neighbors(x)
                    .iter()
                    .map(|&(y, e)| {
                        let ed = &g.edges()[e];
                        let site = ed.site_at(x).map_or(NO_SITE, |s| u32::from(perm[usize::from(s)]));
                        (site, colors[y], ed.bond.index())
                    })
                    .collect();
                s.sort_unstable();
                if best.as_ref().is_none_or(|(b, _)| s < *b) {
                    best = Some((s, perm));
                }
            }
            sym[x] = best.map(|(_, p)| p.clone());
        }
        let site_of = |x: usize, s: Option<u8>| -> u32 {
            match (s, &sym[x]) {
                (Some(s), Some(p)) => u32::from(p[usize::from(s)]),
                (Some(s), None) => u32::from(s),
                (None, _) => NO_SITE,
            }
        };
        let mut code: Vec<u32> = Vec::with_capacity(n + 5 * g.num_edges() + 2);
        code.push(n as u32);
        code.extend(by_rank.iter().map(|&x| g.label(x) as u32));
        let mut edges: Vec<[u32; 5]> = g
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (colors[e.u], colors[e.v]);
                let (sa, sb) = (site_of(e.u, e.site_u), site_of(e.v, e.site_v));
                if a < b {
                    [a, b, e.bond.index() as u32, sa, sb]
                } else {
                    [b, a, e.bond.index() as u32, sb, sa]
                }
            })
            .collect();
        edges.sort_unstable();
        code.push(edges.len() as u32);
        for e in edges {
            code.extend(e);
        }
        code
    }
}

fn rank<T: Ord>(items: &[T]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| items[a].cmp(&items[b]));
    let mut out = vec![0u32; items.len()];
    let mut r = 0u32;
    for k in 0..idx.len() {
        if k > 0 && items[idx[k]] != items[idx[k - 1]] {
            r = k as u32;
        }
        out[idx[k]] = r;
    }
    out
}

fn count_classes(colors: &[u32]) -> usize {
    let mut c: Vec<u32> = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn format_code(g: &MolGraph, code: &[u32]) -> String {
    let n = code.first().copied().unwrap_or(0) as usize;
    let labels: Vec<String> = code[1..=n]
        .iter()
        .map(|&l| g.vocab().entry(l as usize).label.clone())
        .collect();
    let m = code[n + 1] as usize;
    let mut edges = Vec::with_capacity(m);
    for k in 0..m {
        let e = &code[n + 2 + 5 * k..n + 7 + 5 * k];
        let site = |s: u32| {
            if s == NO_SITE {
                String::new()
            } else {
                format!("@{s}")
            }
        };
        let bond = crate::vocab::BondType::ALL[e[2] as usize].symbol();
        edges.push(format!("{}{}{}{}{}", e[0], site(e[3]), bond, e[1], site(e[4])));
    }
    format!("{}|{}", labels.join("."), edges.join(","))
}

/// Exact isomorphism test by backtracking, independent of [`canonical_key`].
pub fn graph_isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    let n = a.num_nodes();
    if n != b.num_nodes() || a.num_edges() != b.num_edges() {
        return false;
    }
    let mut la = a.nodes().to_vec();
    let mut lb = b.nodes().to_vec();
    la.sort_unstable();
    lb.sort_unstable();
    if la != lb {
        return false;
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend(a, b, 0, &mut map, &mut used)
}

fn extend(a: &MolGraph, b: &MolGraph, x: usize, map: &mut [usize], used: &mut [bool]) -> bool {
    let n = a.num_nodes();
    if x == n {
        return (0..n).all(|v| sites_compatible(a, b, v, map));
    }
    for y in 0..n {
        if used[y] || a.label(x) != b.label(y) || a.degree(x) != b.degree(y) {
            continue;
        }
        // every edge from x to an already-mapped node must exist with the same bond
        let ok = a.neighbors(x).iter().all(|&(z, e)| {
            if z >= x {
                return true;
            }
            match b.edge_between(y, map[z]) {
                Some(f) => a.edges()[e].bond == b.edges()[f].bond,
                None => false,
            }
        });
        let mapped_nbrs_b = b
            .neighbors(y)
            .iter()
            .filter(|&&(w, _)| used[w])
            .count();
        let mapped_nbrs_a = a.neighbors(x).iter().filter(|&&(z, _)| z < x).count();
        if !ok || mapped_nbrs_a != mapped_nbrs_b {
            continue;
        }
        map[x] = y;
        used[y] = true;
        if extend(a, b, x + 1, map, used) {
            return true;
        }
        used[y] = false;
        map[x] = usize::MAX;
    }
    false
}

/// Some symmetry of ring node `v` carries every site in `a` onto the
/// matching site in `b`.
fn sites_compatible(a: &MolGraph, b: &MolGraph, v: usize, map: &[usize]) -> bool {
    let Some(r) = a.vocab().entry(a.label(v)).ring.as_ref() else {
        return true;
    };
    let w = map[v];
    r.symmetries.iter().any(|perm| {
        a.neighbors(v).iter().all(|&(z, e)| {
            let f = b.edge_between(w, map[z]).expect("edge mapped");
            let sa = a.edges()[e].site_at(v).expect("ring site");
            let sb = b.edges()[f].site_at(w).expect("ring site");
            perm[usize::from(sa)] == sb
        })
    })
}
