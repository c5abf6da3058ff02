//! Ring perception on atom graphs: a minimum cycle basis built from
//! shortest-path candidate cycles and GF(2) elimination.

use std::collections::{BTreeSet, VecDeque};

use crate::graph::AtomGraph;

/// A simple cycle of the atom graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    /// Atoms in cycle order.
    pub atoms: Vec<usize>,
    /// `bonds[i]` joins `atoms[i]` and `atoms[(i + 1) % len]`.
    pub bonds: Vec<usize>,
    /// True when no atom of this cycle lies on another basis cycle.
    pub isolated: bool,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Minimum cycle basis of `a`, shortest cycles first.
pub fn perceive_rings(a: &AtomGraph) -> Vec<Ring> {
    let n = a.atoms.len();
    let m = a.bonds.len();
    let adj = a.adjacency();
    let components = count_components(&adj);
    let rank = (m + components).saturating_sub(n);
    if rank == 0 {
        return Vec::new();
    }

    let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for root in 0..n {
        let (dist, parent) = bfs(&adj, root);
        for (ei, bond) in a.bonds.iter().enumerate() {
            let (x, y) = (bond.a, bond.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x].map(|p| p.1) == Some(ei) || parent[y].map(|p| p.1) == Some(ei) {
                continue;
            }
            let (px, bx) = path_to_root(&parent, x);
            let (py, by) = path_to_root(&parent, y);
            // paths must meet only at the root
            let sx: BTreeSet<usize> = px[..px.len() - 1].iter().copied().collect();
            if py[..py.len() - 1].iter().any(|v| sx.contains(v)) {
                continue;
            }
            // cycle: root .. x, y .. root
            let mut atoms: Vec<usize> = px.iter().rev().copied().collect();
            atoms.extend(py[..py.len() - 1].iter().copied());
            let mut bonds: Vec<usize> = bx.iter().rev().copied().collect();
            bonds.push(ei);
            bonds.extend(by.iter().copied());
            if atoms.len() < 3 {
                continue;
            }
            let mut key = bonds.clone();
            key.sort_unstable();
            if seen.insert(key) {
                candidates.push((atoms, bonds));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.1.len().cmp(&b.1.len()).then_with(|| {
            let mut ka = a.1.clone();
            let mut kb = b.1.clone();
            ka.sort_unstable();
            kb.sort_unstable();
            ka.cmp(&kb)
        })
    });

    let words = m.div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut chosen = Vec::new();
    for (atoms, bonds) in candidates {
        let mut vec = vec![0u64; words];
        for &b in &bonds {
            vec[b / 64] ^= 1 << (b % 64);
        }
        for (pivot, row) in &basis {
            if vec[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (w, r) in vec.iter_mut().zip(row) {
                    *w ^= r;
                }
            }
        }
        let Some(pivot) = first_bit(&vec) else {
            continue;
        };
        // keep rows reduced on their pivots
        for (_, row) in basis.iter_mut() {
            if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (r, w) in row.iter_mut().zip(&vec) {
                    *r ^= w;
                }
            }
        }
        basis.push((pivot, vec));
        chosen.push((atoms, bonds));
        if chosen.len() == rank {
            break;
        }
    }

    let mut count = vec![0usize; n];
    for (atoms, _) in &chosen {
        for &x in atoms {
            count[x] += 1;
        }
    }
    chosen
        .into_iter()
        .map(|(atoms, bonds)| {
            let isolated = atoms.iter().all(|&x| count[x] == 1);
            Ring {
                atoms,
                bonds,
                isolated,
            }
        })
        .collect()
}

fn first_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

fn count_components(adj: &[Vec<(usize, usize)>]) -> usize {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut c = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        c += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &(y, _) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    c
}

type Parent = Option<(usize, usize)>;

fn bfs(adj: &[Vec<(usize, usize)>], root: usize) -> (Vec<usize>, Vec<Parent>) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    dist[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(x) = q.pop_front() {
        for &(y, e) in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                parent[y] = Some((x, e));
                q.push_back(y);
            }
        }
    }
    (dist, parent)
}

/// Vertices from `x` up to the root (inclusive) and the bonds walked.
fn path_to_root(parent: &[Parent], x: usize) -> (Vec<usize>, Vec<usize>) {
    let mut verts = vec![x];
    let mut bonds = Vec::new();
    let mut cur = x;
    while let Some((p, e)) = parent[cur] {
        verts.push(p);
        bonds.push(e);
        cur = p;
    }
    (verts, bonds)
}

/// Number of basis cycles longer than `len` atoms.
pub fn count_cycles_longer_than(a: &AtomGraph, len: usize) -> usize {
    perceive_rings(a).iter().filter(|r| r.len() > len).count()
}
