//! Substructure vocabulary: the node types of a [`MolGraph`](crate::MolGraph).
//!
//! A vocabulary entry is either a single atom (identified by its element
//! symbol) or a single ring (identified by a ring SMILES such as `c1ccccc1`).
//! Ring entries carry a [`RingTemplate`] describing the ring atoms in label
//! order, which attachment sites can take external bonds, and which site
//! permutations are symmetries of the ring.
//!
//! Vocabulary files are tab-separated, one entry per line:
//!
//! ```text
//! # id  kind  label     max_valence | ring_size:attachment_capacity
//! 0     atom  C         4
//! 7     ring  c1ccccc1  6:6
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smiles;

const DESK_VOCAB: &str = include_str!("../data/vocab_desk.tsv");
const FULL_VOCAB: &str = include_str!("../data/vocab_full.tsv");

/// Bond types, in the order used for one-hot edge features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondType {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondType {
    /// Number of bond types (the edge feature width).
    pub const COUNT: usize = 4;
    pub const ALL: [BondType; 4] = [
        BondType::Single,
        BondType::Double,
        BondType::Triple,
        BondType::Aromatic,
    ];

    pub fn order(self) -> f64 {
        f64::from(self.half_order()) / 2.0
    }

    /// Bond order in half units, so aromatic bonds (1.5) stay integral.
    pub fn half_order(self) -> u32 {
        match self {
            BondType::Single => 2,
            BondType::Double => 4,
            BondType::Triple => 6,
            BondType::Aromatic => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            BondType::Single => '-',
            BondType::Double => '=',
            BondType::Triple => '#',
            BondType::Aromatic => ':',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '-' => Some(BondType::Single),
            '=' => Some(BondType::Double),
            '#' => Some(BondType::Triple),
            ':' => Some(BondType::Aromatic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BondType::Single => "single",
            BondType::Double => "double",
            BondType::Triple => "triple",
            BondType::Aromatic => "aromatic",
        }
    }
}

impl fmt::Display for BondType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BondType {
    type Err = VocabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BondType::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| VocabError::UnknownBond(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("entry ids must be dense: expected {expected}, found {found}")]
    NonDenseId { expected: usize, found: usize },
    #[error("ring `{label}`: {message}")]
    BadRing { label: String, message: String },
    #[error("unknown bond type `{0}`")]
    UnknownBond(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryKind {
    Atom,
    Ring,
}

/// One atom of a ring template, in label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingAtom {
    pub element: String,
    pub aromatic: bool,
    pub hydrogens: u8,
}

/// Atom-level structure of a ring entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingTemplate {
    pub atoms: Vec<RingAtom>,
    /// `bonds[i]` joins atom `i` and atom `(i + 1) % n`.
    pub bonds: Vec<BondType>,
    /// Bond order available for external bonds at each site.
    pub site_valence: Vec<u8>,
    /// Site permutations (dihedral maps) that preserve atoms and ring bonds.
    /// Always contains the identity first.
    pub symmetries: Vec<Vec<u8>>,
}

impl RingTemplate {
    pub fn size(&self) -> usize {
        self.atoms.len()
    }

    fn from_label(label: &str) -> Result<Self, VocabError> {
        let bad = |message: String| VocabError::BadRing {
            label: label.to_string(),
            message,
        };
        let graph = smiles::parse_atom_graph(label).map_err(|e| bad(e.to_string()))?;
        let n = graph.atoms.len();
        if n < 3 {
            return Err(bad(format!("ring needs at least 3 atoms, found {n}")));
        }
        if graph.bonds.len() != n {
            return Err(bad("label must spell exactly one simple cycle".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for b in &graph.bonds {
            adj[b.a].push((b.b, b.bond));
            adj[b.b].push((b.a, b.bond));
        }
        if adj.iter().any(|a| a.len() != 2) {
            return Err(bad("every ring atom must have exactly two ring bonds".into()));
        }
        // walk the cycle starting at atom 0 towards its lower-indexed neighbour
        let mut order = vec![0usize];
        let mut bonds = Vec::with_capacity(n);
        let mut prev = usize::MAX;
        let mut cur = 0usize;
        loop {
            let mut nbrs = adj[cur].clone();
            nbrs.sort_by_key(|&(x, _)| x);
            let &(next, bond) = nbrs
                .iter()
                .find(|&&(x, _)| x != prev)
                .ok_or_else(|| bad("degenerate cycle".into()))?;
            bonds.push(bond);
            if next == 0 {
                break;
            }
            if order.contains(&next) || order.len() > n {
                return Err(bad("label is not a single cycle".into()));
            }
            order.push(next);
            prev = cur;
            cur = next;
        }
        if order.len() != n {
            return Err(bad("label is not a single cycle".into()));
        }
        let atoms: Vec<RingAtom> = order
            .iter()
            .map(|&i| {
                let a = &graph.atoms[i];
                RingAtom {
                    element: a.element.clone(),
                    aromatic: a.aromatic,
                    hydrogens: a.hydrogens.unwrap_or(0),
                }
            })
            .collect();

        let mut site_valence = Vec::with_capacity(n);
        for (i, atom) in atoms.iter().enumerate() {
            let standard = ring_standard_valence(&atom.element)
                .ok_or_else(|| bad(format!("unsupported ring element {}", atom.element)))?;
            let left = bonds[(i + n - 1) % n].half_order();
            let right = bonds[i].half_order();
            let used = left + right;
            let free_half = (2 * standard).saturating_sub(used);
            let free = if atom.aromatic {
                // aromatic atoms: only the sigma slot left after the ring, plus any listed H
                free_half / 2 + u32::from(atom.hydrogens)
            } else {
                (free_half / 2).saturating_sub(u32::from(atom.hydrogens))
            };
            site_valence.push(free as u8);
        }

        let bond_between = |a: usize, b: usize| -> BondType {
            if (a + 1) % n == b {
                bonds[a]
            } else {
                bonds[b]
            }
        };
        let mut symmetries = Vec::new();
        for reflect in [false, true] {
            for shift in 0..n {
                let map: Vec<usize> = (0..n)
                    .map(|i| {
                        if reflect {
                            (shift + n - i) % n
                        } else {
                            (shift + i) % n
                        }
                    })
                    .collect();
                let atoms_ok = (0..n).all(|i| atoms[map[i]] == atoms[i]);
                let bonds_ok = (0..n).all(|i| bond_between(map[i], map[(i + 1) % n]) == bonds[i]);
                if atoms_ok && bonds_ok {
                    let perm: Vec<u8> = map.iter().map(|&x| x as u8).collect();
                    if !symmetries.contains(&perm) {
                        symmetries.push(perm);
                    }
                }
            }
        }

        Ok(RingTemplate {
            atoms,
            bonds,
            site_valence,
            symmetries,
        })
    }
}

/// Valence used when deciding how many external bonds a ring atom can take.
fn ring_standard_valence(element: &str) -> Option<u32> {
    Some(match element {
        "B" => 3,
        "C" => 4,
        "N" => 3,
        "O" => 2,
        "P" => 3,
        "S" => 2,
        "Se" => 2,
        "Si" => 4,
        "Te" => 2,
        "As" => 3,
        "Ge" => 4,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub id: usize,
    pub kind: EntryKind,
    /// Element symbol for atoms, ring SMILES for rings.
    pub label: String,
    /// Bond-order capacity (atoms only; 0 for rings).
    pub max_valence: u8,
    /// Maximum number of external edges (rings only; equals `max_valence` for atoms).
    pub attachment_capacity: u8,
    pub ring: Option<RingTemplate>,
}

impl VocabEntry {
    pub fn is_ring(&self) -> bool {
        self.kind == EntryKind::Ring
    }

    pub fn ring_size(&self) -> usize {
        self.ring.as_ref().map_or(0, RingTemplate::size)
    }
}

/// Ordered catalogue of substructures. Indices are dense `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstructureVocab {
    entries: Vec<VocabEntry>,
    by_label: HashMap<String, usize>,
}

impl SubstructureVocab {
    /// Ten-entry vocabulary: C N O S F Cl Br, benzene, cyclopentane, cyclohexane.
    pub fn desk() -> Arc<Self> {
        Arc::new(Self::parse(DESK_VOCAB).expect("bundled desk vocabulary is valid"))
    }

    /// Full 149-entry vocabulary (118 atoms, 31 rings).
    pub fn full() -> Arc<Self> {
        Arc::new(Self::parse(FULL_VOCAB).expect("bundled full vocabulary is valid"))
    }

    /// Builds an atom-only vocabulary from `(symbol, max_valence)` pairs.
    pub fn atoms(list: &[(&str, u8)]) -> Result<Self, VocabError> {
        let text: String = list
            .iter()
            .enumerate()
            .map(|(i, (s, v))| format!("{i}\tatom\t{s}\t{v}\n"))
            .collect();
        Self::parse(&text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| VocabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut entries: Vec<VocabEntry> = Vec::new();
        let mut by_label = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let syntax = |message: &str| VocabError::Syntax {
                line: lineno + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(syntax("expected 4 tab-separated fields"));
            }
            let id: usize = fields[0].parse().map_err(|_| syntax("bad id"))?;
            if id != entries.len() {
                return Err(VocabError::NonDenseId {
                    expected: entries.len(),
                    found: id,
                });
            }
            let label = fields[2].to_string();
            let entry = match fields[1] {
                "atom" => {
                    let max_valence: u8 =
                        fields[3].parse().map_err(|_| syntax("bad max_valence"))?;
                    if !(1..=8).contains(&max_valence) {
                        return Err(syntax("atom max_valence must be in 1..=8"));
                    }
                    VocabEntry {
                        id,
                        kind: EntryKind::Atom,
                        label: label.clone(),
                        max_valence,
                        attachment_capacity: max_valence,
                        ring: None,
                    }
                }
                "ring" => {
                    let (size, cap) = fields[3]
                        .split_once(':')
                        .ok_or_else(|| syntax("ring spec must be size:capacity"))?;
                    let size: usize = size.parse().map_err(|_| syntax("bad ring size"))?;
                    let cap: u8 = cap.parse().map_err(|_| syntax("bad capacity"))?;
                    let template = RingTemplate::from_label(&label)?;
                    if template.size() != size || size < 3 {
                        return Err(VocabError::BadRing {
                            label,
                            message: format!(
                                "declared size {size} but label has {} atoms",
                                template.size()
                            ),
                        });
                    }
                    if cap == 0 || usize::from(cap) > size {
                        return Err(VocabError::BadRing {
                            label,
                            message: "attachment capacity must be in 1..=ring_size".into(),
                        });
                    }
                    VocabEntry {
                        id,
                        kind: EntryKind::Ring,
                        label: label.clone(),
                        max_valence: 0,
                        attachment_capacity: cap,
                        ring: Some(template),
                    }
                }
                other => return Err(syntax(&format!("unknown kind `{other}`"))),
            };
            if by_label.insert(label.clone(), id).is_some() {
                return Err(VocabError::DuplicateLabel(label));
            }
            entries.push(entry);
        }
        Ok(SubstructureVocab { entries, by_label })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let spec = match e.kind {
                EntryKind::Atom => e.max_valence.to_string(),
                EntryKind::Ring => format!("{}:{}", e.ring_size(), e.attachment_capacity),
            };
            let kind = match e.kind {
                EntryKind::Atom => "atom",
                EntryKind::Ring => "ring",
            };
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.id, kind, e.label, spec));
        }
        out
    }

    /// Number of entries (the node feature width, without the mask token).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&VocabEntry> {
        self.entries.get(id)
    }

    /// Panics if `id` is out of range; graphs only hold validated ids.
    pub fn entry(&self, id: usize) -> &VocabEntry {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn lookup(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    /// Atom entry for an element symbol (aromatic lowercase symbols are capitalised).
    pub fn atom_id(&self, element: &str) -> Option<usize> {
        let id = self.lookup(element)?;
        (self.entries[id].kind == EntryKind::Atom).then_some(id)
    }

    pub fn ring_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter(|e| e.is_ring()).map(|e| e.id)
    }

    pub fn atom_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_ring()).count()
    }

    pub fn ring_count(&self) -> usize {
        self.entries.len() - self.atom_count()
    }
}
